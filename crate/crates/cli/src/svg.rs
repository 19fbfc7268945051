//! Minimal SVG charts: polylines and bars over labelled axes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A titled chart with axis labels.
pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut x0, mut x1) = bounds(xs);
        let (mut y0, mut y1) = bounds(ys);
        if x0 == x1 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y0 == y1 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.filter(|x| x.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
        })
        .unwrap_or((0.0, 1.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn num(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

impl Chart<'_> {
    fn open(&self, f: &Frame) -> String {
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        )
        .unwrap();
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        writeln!(s, r#"<path d="M{l} {t} L{l} {b} L{r} {b}" stroke="black" fill="none"/>"#).unwrap();
        for i in 0..=4 {
            let fx = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
            let fy = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
            writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                f.px(fx),
                b + 16.0,
                num(fx)
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                l - 6.0,
                f.py(fy) + 4.0,
                num(fy)
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(self.y_label)
        )
        .unwrap();
        s
    }

    /// One polyline per named series. Non-finite points are skipped.
    pub fn lines(&self, series: &[(String, Vec<(f64, f64)>)]) -> String {
        let pts = || series.iter().flat_map(|(_, p)| p.iter());
        let f = Frame::new(pts().map(|p| p.0), pts().map(|p| p.1));
        let mut s = self.open(&f);
        for (i, (name, points)) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                .collect();
            writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                coords.join(" ")
            )
            .unwrap();
            for c in &coords {
                let (x, y) = c.split_once(',').unwrap();
                writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).unwrap();
            }
            writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                WIDTH - MARGIN - 120.0,
                MARGIN + 14.0 * i as f64,
                escape(name)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }

    /// Bars at positions `0..values.len()`. Infinite values are drawn at
    /// the top of the frame in grey.
    pub fn bars(&self, values: &[f64]) -> String {
        let f = Frame::new(
            [0.0, values.len() as f64].into_iter(),
            values.iter().copied().chain([0.0]),
        );
        let mut s = self.open(&f);
        let w = (WIDTH - 2.0 * MARGIN) / values.len().max(1) as f64;
        for (i, &v) in values.iter().enumerate() {
            let (top, color) = if v.is_finite() {
                (f.py(v), COLORS[0])
            } else {
                (MARGIN, "#bbbbbb")
            };
            let x = f.px(i as f64);
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                w.max(0.5),
                (f.py(0.0) - top).max(0.0)
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed() {
        let c = Chart {
            title: "a < b",
            x_label: "k",
            y_label: "score",
        };
        let svg = c.lines(&[("s".into(), vec![(2.0, 1.0), (3.0, f64::NAN), (4.0, 0.5)])]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<circle").count(), 2);
        let bars = c.bars(&[f64::INFINITY, 1.0, 2.0]);
        assert_eq!(bars.matches("<rect").count(), 4);
    }
}
