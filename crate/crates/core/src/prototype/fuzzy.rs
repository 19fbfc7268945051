use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_k, nearest, rng_from_seed, Assign};
use crate::distance::sq_euclidean;
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Fuzzy c-means hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyParams {
    pub c: usize,
    /// Membership exponent `m > 1`.
    pub fuzzifier: f64,
    pub seed: u64,
    /// Stop once no membership changes by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl FuzzyParams {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            fuzzifier: 2.0,
            seed: 0,
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }

    pub fn fit(&self, table: &FeatureTable) -> Result<FuzzyModel> {
        let n = table.n_rows();
        check_k(self.c, n)?;
        if !(self.fuzzifier > 1.0) || !self.fuzzifier.is_finite() {
            return Err(Error::param(format!(
                "fuzzifier {} must be a finite value above 1",
                self.fuzzifier
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        let c = self.c;
        let m = self.fuzzifier;
        let mut rng = rng_from_seed(self.seed);
        let mut membership: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let mut centroids = vec![vec![0.0; table.n_cols()]; c];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            iterations += 1;
            update_centroids(table, &membership, m, &mut centroids);
            let mut delta = 0.0f64;
            for (row, u) in table.rows().zip(membership.iter_mut()) {
                let next = memberships_for(row, &centroids, m);
                for (a, b) in u.iter().zip(&next) {
                    delta = delta.max((a - b).abs());
                }
                *u = next;
            }
            if delta < self.tolerance {
                converged = true;
                break;
            }
        }
        let labels = LabelVector::new(membership.iter().map(|u| argmax(u) as i32).collect())?;
        let objective = table
            .rows()
            .zip(&membership)
            .map(|(r, u)| {
                u.iter()
                    .zip(&centroids)
                    .map(|(w, ctr)| w.powf(m) * sq_euclidean(r, ctr))
                    .sum::<f64>()
            })
            .sum();
        Ok(FuzzyModel {
            c,
            fuzzifier: m,
            membership,
            centroids,
            labels,
            objective,
            iterations,
            converged,
            seed: self.seed,
        })
    }
}

/// Fitted fuzzy partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyModel {
    pub c: usize,
    pub fuzzifier: f64,
    /// `n × c` membership coefficients; rows sum to one.
    pub membership: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    /// Hardened labels: argmax membership, lowest index on ties.
    pub labels: LabelVector,
    /// Weighted within-cluster objective `Σ u^m d²`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl FuzzyModel {
    /// Memberships of arbitrary rows against the fitted centroids.
    pub fn memberships(&self, table: &FeatureTable) -> Result<Vec<Vec<f64>>> {
        self.check_dim(table)?;
        Ok(table
            .rows()
            .map(|r| memberships_for(r, &self.centroids, self.fuzzifier))
            .collect())
    }

    fn check_dim(&self, table: &FeatureTable) -> Result<()> {
        let d = self.centroids[0].len();
        if table.n_cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: table.n_cols(),
            });
        }
        Ok(())
    }
}

impl Assign for FuzzyModel {
    /// Argmax membership, which is the nearest centroid.
    fn assign(&self, table: &FeatureTable) -> Result<LabelVector> {
        self.check_dim(table)?;
        LabelVector::new(
            table
                .rows()
                .map(|r| nearest(r, &self.centroids).0 as i32)
                .collect(),
        )
    }
}

/// Convenience wrapper around [`FuzzyParams`].
pub fn fuzzy_cmeans_fit(
    table: &FeatureTable,
    c: usize,
    fuzzifier: f64,
    seed: u64,
    tolerance: f64,
) -> Result<FuzzyModel> {
    FuzzyParams {
        fuzzifier,
        seed,
        tolerance,
        ..FuzzyParams::new(c)
    }
    .fit(table)
}

fn update_centroids(table: &FeatureTable, membership: &[Vec<f64>], m: f64, centroids: &mut [Vec<f64>]) {
    let d = table.n_cols();
    for (j, ctr) in centroids.iter_mut().enumerate() {
        let mut acc = vec![0.0; d];
        let mut total = 0.0;
        for (row, u) in table.rows().zip(membership) {
            let w = u[j].powf(m);
            total += w;
            for (a, x) in acc.iter_mut().zip(row) {
                *a += w * x;
            }
        }
        if total > 0.0 {
            for (c, a) in ctr.iter_mut().zip(acc) {
                *c = a / total;
            }
        }
    }
}

/// `u_j = 1 / Σ_l (d_j / d_l)^(2/(m-1))`, evaluated in log space. A row on
/// top of a centroid belongs to the first such centroid entirely.
pub(crate) fn memberships_for(row: &[f64], centroids: &[Vec<f64>], m: f64) -> Vec<f64> {
    let d2: Vec<f64> = centroids.iter().map(|c| sq_euclidean(row, c)).collect();
    let mut u = vec![0.0; centroids.len()];
    if let Some(hit) = d2.iter().position(|&v| v == 0.0) {
        u[hit] = 1.0;
        return u;
    }
    let p = 1.0 / (m - 1.0);
    let logs: Vec<f64> = d2.iter().map(|v| -p * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (w, l) in u.iter_mut().zip(&logs) {
        *w = (l - top).exp();
        total += *w;
    }
    u.iter_mut().for_each(|w| *w /= total);
    u
}

fn argmax(u: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in u.iter().enumerate() {
        if v > u[best] {
            best = j;
        }
    }
    best
}
