//! Prototype-based clustering: K-means, mini-batch K-means, fuzzy c-means
//! and Gaussian mixture models.
//!
//! Every fitter draws randomness from a ChaCha stream seeded by the caller,
//! so a fit is a pure function of `(data, hyperparameters, seed)`. Distance
//! ties always resolve toward the lowest cluster index.

mod fuzzy;
mod gmm;
mod kmeans;
mod minibatch;

pub use fuzzy::{fuzzy_cmeans_fit, FuzzyModel, FuzzyParams};
pub use gmm::{gmm_fit, CovarianceType, GmmModel, GmmParams};
pub use kmeans::{kmeans_fit, KMeansModel, KMeansParams};
pub(crate) use kmeans::lloyd;
pub use minibatch::{default_batch_size, minibatch_kmeans_fit, MiniBatchConfig};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distance::sq_euclidean;
use crate::error::Result;
use crate::table::{FeatureTable, LabelVector};

/// Replays a fitted model on new rows.
pub trait Assign {
    /// Nearest-centroid label for the K-means family, highest posterior
    /// component for mixtures. Ties go to the lowest index.
    fn assign(&self, table: &FeatureTable) -> Result<LabelVector>;
}

/// Labels `table` with `model`.
pub fn assign<M: Assign + ?Sized>(model: &M, table: &FeatureTable) -> Result<LabelVector> {
    model.assign(table)
}

/// Centroid initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// D²-weighted seeding.
    #[default]
    KMeansPlusPlus,
    /// `k` distinct rows drawn uniformly.
    Uniform,
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index and squared distance of the nearest centroid.
#[inline]
pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_euclidean(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub(crate) fn init_centroids(
    table: &FeatureTable,
    k: usize,
    init: Init,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    match init {
        Init::KMeansPlusPlus => kmeans_plus_plus(table, k, rng),
        Init::Uniform => rand::seq::index::sample(rng, table.n_rows(), k)
            .into_iter()
            .map(|i| table.row(i).to_vec())
            .collect(),
    }
}

fn kmeans_plus_plus(table: &FeatureTable, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = table.n_rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![table.row(first).to_vec()];
    let mut d2: Vec<f64> = table
        .rows()
        .map(|r| sq_euclidean(r, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight has a positive entry")
        } else {
            // all remaining rows coincide with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = table.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(table.rows()) {
            *d = d.min(sq_euclidean(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Means of the assigned rows; clusters with no rows keep `previous`.
pub(crate) fn cluster_means(
    table: &FeatureTable,
    labels: &[usize],
    previous: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let k = previous.len();
    let d = table.n_cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (row, &l) in table.rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    let means = sums
        .into_iter()
        .zip(&counts)
        .zip(previous)
        .map(|((s, &c), prev)| {
            if c == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / c as f64).collect()
            }
        })
        .collect();
    (means, counts)
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(crate::Error::param("cluster count must be at least 1"));
    }
    if k > n {
        return Err(crate::Error::param(format!(
            "cluster count {k} exceeds row count {n}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_breaks_ties_low() {
        let c = vec![vec![-1.0], vec![1.0]];
        assert_eq!(nearest(&[0.0], &c).0, 0);
        assert_eq!(nearest(&[0.5], &c).0, 1);
    }

    #[test]
    fn plus_plus_picks_distinct_rows() {
        let t = FeatureTable::from_rows((0..6).map(|i| vec![i as f64 * i as f64]).collect())
            .unwrap();
        let mut rng = rng_from_seed(3);
        let mut c = kmeans_plus_plus(&t, 6, &mut rng);
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, (0..6).map(|i| vec![(i * i) as f64]).collect::<Vec<_>>());
    }

    #[test]
    fn plus_plus_handles_duplicates() {
        let t = FeatureTable::from_rows(vec![vec![1.0]; 4]).unwrap();
        let mut rng = rng_from_seed(0);
        assert_eq!(kmeans_plus_plus(&t, 3, &mut rng).len(), 3);
    }
}
