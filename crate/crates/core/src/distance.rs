//! Point metrics and condensed pairwise distance matrices.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

/// Distance between two points.
///
/// Serialized as its display name, e.g. `"cosine"` or `"minkowski(3)"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    SqEuclidean,
    Cityblock,
    Cosine,
    Minkowski { p: f64 },
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Metric::Minkowski { p } if !(p >= 1.0 && p.is_finite()) => Err(Error::param(format!(
                "minkowski exponent must be a finite value >= 1, got {p}"
            ))),
            _ => Ok(()),
        }
    }

    /// Distance between `a` and `b`. Cosine distance of a zero vector is an
    /// error; callers that scan many pairs should check rows up front with
    /// [`Metric::check_rows`].
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Metric::Euclidean => sq_euclidean(a, b).sqrt(),
            Metric::SqEuclidean => sq_euclidean(a, b),
            Metric::Cityblock => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                let sim = dot / (na.sqrt() * nb.sqrt());
                (1.0 - sim).max(0.0)
            }
            Metric::Minkowski { p } => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }

    pub fn check_rows(&self, table: &FeatureTable) -> Result<()> {
        self.validate()?;
        if let Metric::Cosine = self {
            for (id, row) in table.row_ids().iter().zip(table.rows()) {
                if row.iter().all(|&v| v == 0.0) {
                    return Err(Error::param(format!(
                        "row `{id}` is a zero vector; cosine distance is undefined"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => f.write_str("euclidean"),
            Metric::SqEuclidean => f.write_str("sqeuclidean"),
            Metric::Cityblock => f.write_str("cityblock"),
            Metric::Cosine => f.write_str("cosine"),
            Metric::Minkowski { p } => write!(f, "minkowski({p})"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let m = match s.as_str() {
            "euclidean" | "l2" => Metric::Euclidean,
            "sqeuclidean" => Metric::SqEuclidean,
            "cityblock" | "manhattan" | "l1" => Metric::Cityblock,
            "cosine" => Metric::Cosine,
            _ => {
                let p = s
                    .strip_prefix("minkowski(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::param(format!("unknown metric `{s}`")))?;
                Metric::Minkowski { p }
            }
        };
        m.validate()?;
        Ok(m)
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[inline]
pub(crate) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Upper triangle of a symmetric distance matrix, row-major over pairs
/// `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    condensed: Vec<f64>,
    metric_name: String,
}

impl DistanceMatrix {
    pub fn from_condensed(n: usize, condensed: Vec<f64>, metric_name: &str) -> Result<Self> {
        if n < 2 || condensed.len() != n * (n - 1) / 2 {
            return Err(Error::Malformed(format!(
                "condensed length {} does not match n = {}",
                condensed.len(),
                n
            )));
        }
        if condensed.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Numeric(
                "distances must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            n,
            condensed,
            metric_name: metric_name.to_string(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Distance between points `i` and `j`; zero on the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.condensed[self.index(i, j)],
            Greater => self.condensed[self.index(j, i)],
            Equal => 0.0,
        }
    }
}

/// Condensed pairwise distances between table rows.
pub fn pairwise_distances(table: &FeatureTable, metric: Metric) -> Result<DistanceMatrix> {
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::param("pairwise distances need at least 2 rows"));
    }
    metric.check_rows(table)?;
    // Row i owns the contiguous block of pairs (i, i+1..n).
    let blocks: Vec<Vec<f64>> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let a = table.row(i);
            (i + 1..n).map(|j| metric.distance(a, table.row(j))).collect()
        })
        .collect();
    let condensed = blocks.concat();
    DistanceMatrix::from_condensed(n, condensed, &metric.to_string())
}
