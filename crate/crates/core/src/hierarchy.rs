//! Agglomerative clustering over a precomputed distance matrix.
//!
//! Clusters live in slots named after their smallest member row. Each step
//! merges the closest pair of active slots, lowest `(slot_a, slot_b)` first
//! on ties, and updates distances by the Lance-Williams recurrence. A
//! per-slot nearest-neighbour cache keeps the typical cost near `O(n²)`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::table::LabelVector;

/// Inter-cluster distance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Self::Ward, Self::Complete, Self::Average, Self::Single];
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Single => "single",
            Self::Complete => "complete",
            Self::Average => "average",
            Self::Ward => "ward",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Self::Single),
            "complete" => Ok(Self::Complete),
            "average" => Ok(Self::Average),
            "ward" => Ok(Self::Ward),
            other => Err(Error::param(format!("unknown linkage `{other}`"))),
        }
    }
}

/// One merge step. Ids below `n` are rows; id `n + s` is the cluster formed
/// at step `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// How Ward heights relate to merge cost.
pub const WARD_HEIGHT_CONVENTION: &str =
    "ward heights are sqrt(2 * increase in within-cluster squared error)";

/// Merge history of `n` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
    pub metric_name: String,
    pub height_convention: String,
}

/// Builds the full merge tree.
pub fn agglomerate(d: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = d.n();
    if n < 2 {
        return Err(Error::param("agglomeration needs at least 2 rows"));
    }
    if linkage == Linkage::Ward && d.metric_name() != "euclidean" {
        return Err(Error::param(format!(
            "ward linkage requires euclidean distances, got `{}`",
            d.metric_name()
        )));
    }
    let square = linkage == Linkage::Ward;
    let mut work = Working::new(d, square);
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    // nn[i]: nearest active j > i, lowest j on ties.
    let mut nn = vec![usize::MAX; n];
    let mut nn_d = vec![f64::INFINITY; n];
    for i in 0..n {
        work.refresh(i, &active, &mut nn, &mut nn_d);
    }
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut i = usize::MAX;
        for s in 0..n {
            if active[s] && nn[s] != usize::MAX && (i == usize::MAX || nn_d[s] < nn_d[i]) {
                i = s;
            }
        }
        let j = nn[i];
        let dij = nn_d[i];
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let (dik, djk) = (work.get(i, k), work.get(j, k));
            let nk = size[k] as f64;
            let v = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Ward => {
                    (((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk)).max(0.0)
                }
            };
            work.set(i, k, v);
        }
        active[j] = false;
        let height = if square { dij.sqrt() } else { dij };
        let (a, b) = (id[i].min(id[j]), id[i].max(id[j]));
        size[i] += size[j];
        merges.push(Merge {
            a,
            b,
            height,
            size: size[i],
        });
        id[i] = n + step;
        for k in 0..n {
            if !active[k] {
                continue;
            }
            if k == i || nn[k] == i || nn[k] == j {
                work.refresh(k, &active, &mut nn, &mut nn_d);
            } else if k < i {
                let v = work.get(k, i);
                if v < nn_d[k] || (v == nn_d[k] && i < nn[k]) {
                    nn[k] = i;
                    nn_d[k] = v;
                }
            }
        }
    }
    Ok(Dendrogram {
        n,
        merges,
        linkage,
        metric_name: d.metric_name().to_string(),
        height_convention: if square {
            WARD_HEIGHT_CONVENTION.to_string()
        } else {
            "heights are linkage distances".to_string()
        },
    })
}

struct Working {
    n: usize,
    d: Vec<f64>,
}

impl Working {
    fn new(d: &DistanceMatrix, square: bool) -> Self {
        let mut v = d.condensed().to_vec();
        if square {
            v.iter_mut().for_each(|x| *x *= *x);
        }
        Self { n: d.n(), d: v }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let x = self.idx(i, j);
        self.d[x] = v;
    }

    fn refresh(&self, i: usize, active: &[bool], nn: &mut [usize], nn_d: &mut [f64]) {
        nn[i] = usize::MAX;
        nn_d[i] = f64::INFINITY;
        for j in i + 1..self.n {
            if active[j] {
                let v = self.get(i, j);
                if nn[i] == usize::MAX || v < nn_d[i] {
                    nn[i] = j;
                    nn_d[i] = v;
                }
            }
        }
    }
}

impl Dendrogram {
    /// Labels after undoing the last `k - 1` merges, numbered by first row
    /// appearance.
    pub fn cut(&self, k: usize) -> Result<LabelVector> {
        let n = self.n;
        if k == 0 || k > n {
            return Err(Error::param(format!("cut size {k} must be in 1..={n}")));
        }
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (s, m) in self.merges.iter().take(n - k).enumerate() {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra] = n + s;
            parent[rb] = n + s;
        }
        let roots: Vec<i32> = (0..n).map(|i| find(&mut parent, i) as i32).collect();
        Ok(LabelVector::canonical(&roots))
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Indented text tree, root first. Leaves print `row_names[i]` when
    /// given, otherwise the row index.
    pub fn render_text(&self, row_names: Option<&[String]>) -> String {
        let mut out = String::new();
        let root = if self.n == 1 { 0 } else { 2 * self.n - 2 };
        let mut stack = vec![(root, 0usize)];
        while let Some((node, depth)) = stack.pop() {
            let pad = "  ".repeat(depth);
            if node < self.n {
                let name = row_names
                    .and_then(|r| r.get(node).cloned())
                    .unwrap_or_else(|| node.to_string());
                let _ = writeln!(out, "{pad}- {name}");
            } else {
                let m = &self.merges[node - self.n];
                let _ = writeln!(out, "{pad}+ h={:.6} size={}", m.height, m.size);
                stack.push((m.b, depth + 1));
                stack.push((m.a, depth + 1));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{pairwise_distances, Metric};
    use crate::table::FeatureTable;

    fn line(points: &[f64]) -> DistanceMatrix {
        let t = FeatureTable::from_rows(points.iter().map(|&p| vec![p]).collect()).unwrap();
        pairwise_distances(&t, Metric::Euclidean).unwrap()
    }

    #[test]
    fn single_linkage_hand_example() {
        let d = agglomerate(&line(&[0.0, 1.0, 10.0]), Linkage::Single).unwrap();
        assert_eq!(d.merges[0], Merge { a: 0, b: 1, height: 1.0, size: 2 });
        assert_eq!(d.merges[1], Merge { a: 2, b: 3, height: 9.0, size: 3 });
        assert_eq!(d.cut(2).unwrap().as_slice(), &[0, 0, 1]);
        assert_eq!(d.cut(1).unwrap().as_slice(), &[0, 0, 0]);
        assert_eq!(d.cut(3).unwrap().as_slice(), &[0, 1, 2]);
        assert!(d.cut(0).is_err() && d.cut(4).is_err());
    }

    #[test]
    fn ward_merges_pairs_first() {
        let d = agglomerate(&line(&[0.0, 1.0, 100.0, 101.0]), Linkage::Ward).unwrap();
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert_eq!((d.merges[1].a, d.merges[1].b), (2, 3));
        assert_eq!(d.merges[2].size, 4);
        // cost 0.5 = 1*1/2 * 1²; height sqrt(2*0.5)
        assert!((d.merges[0].height - 1.0).abs() < 1e-12);
        // cross merge: sqrt(2 * 2*2/4 * 100²) = 100*sqrt(2)
        assert!((d.merges[2].height - 100.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn ward_needs_euclidean() {
        let t = FeatureTable::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let d = pairwise_distances(&t, Metric::Cityblock).unwrap();
        assert!(agglomerate(&d, Linkage::Ward).is_err());
        assert!(agglomerate(&d, Linkage::Average).is_ok());
    }

    #[test]
    fn ties_take_smallest_pair() {
        let d = agglomerate(&line(&[0.0, 1.0, 2.0, 3.0]), Linkage::Single).unwrap();
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert_eq!((d.merges[1].a, d.merges[1].b), (2, 4));
        assert_eq!((d.merges[2].a, d.merges[2].b), (3, 5));
    }

    #[test]
    fn average_and_complete_hand_values() {
        // {0,1} merge at 1; then 4 vs {0,1}: complete 4, average 3.5
        let c = agglomerate(&line(&[0.0, 1.0, 4.0]), Linkage::Complete).unwrap();
        assert_eq!(c.merges[1].height, 4.0);
        let a = agglomerate(&line(&[0.0, 1.0, 4.0]), Linkage::Average).unwrap();
        assert_eq!(a.merges[1].height, 3.5);
    }

    #[test]
    fn renders_tree() {
        let d = agglomerate(&line(&[0.0, 1.0, 10.0]), Linkage::Single).unwrap();
        let text = d.render_text(None);
        assert_eq!(
            text,
            "+ h=9.000000 size=3\n  - 2\n  + h=1.000000 size=2\n    - 0\n    - 1\n"
        );
    }
}
