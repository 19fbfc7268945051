use serde::{Deserialize, Serialize};

use super::kmeans::KMeansModel;
use super::{check_k, init_centroids, nearest, rng_from_seed, Init};
use crate::distance::sq_euclidean;
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// Mini-batch K-means settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniBatchConfig {
    pub k: usize,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Early stop once no centroid moves farther than this within a batch.
    /// Zero disables the check.
    pub tolerance: f64,
    pub init: Init,
}

/// Default batch size: a tenth of the rows, at least 1 and at most 1024.
pub fn default_batch_size(n: usize) -> usize {
    (n / 10).clamp(1, 1024)
}

impl MiniBatchConfig {
    pub fn new(k: usize, n_rows: usize) -> Self {
        Self {
            k,
            batch_size: default_batch_size(n_rows),
            max_iterations: 100,
            seed: 0,
            tolerance: 0.0,
            init: Init::KMeansPlusPlus,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_k(self.k, n)?;
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::param(format!(
                "batch size {} must be in 1..={n}",
                self.batch_size
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations must be at least 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::param("tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// Mini-batch K-means. Each iteration draws `batch_size` distinct rows,
/// assigns them against the current centroids, then folds each sample into
/// its centroid with learning rate `1 / (samples ever assigned to it)`, so
/// every centroid is the running mean of everything it has absorbed.
pub fn minibatch_kmeans_fit(table: &FeatureTable, config: &MiniBatchConfig) -> Result<KMeansModel> {
    let n = table.n_rows();
    config.validate(n)?;
    let mut rng = rng_from_seed(config.seed);
    let mut centroids = init_centroids(table, config.k, config.init, &mut rng);
    let mut counts = vec![0u64; config.k];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut batch_labels = Vec::with_capacity(config.batch_size);
    for _ in 0..config.max_iterations {
        iterations += 1;
        let batch = rand::seq::index::sample(&mut rng, n, config.batch_size).into_vec();
        batch_labels.clear();
        batch_labels.extend(batch.iter().map(|&i| nearest(table.row(i), &centroids).0));
        let before = centroids.clone();
        for (&i, &c) in batch.iter().zip(&batch_labels) {
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            for (m, x) in centroids[c].iter_mut().zip(table.row(i)) {
                *m += eta * (x - *m);
            }
        }
        trace.push(
            batch
                .iter()
                .zip(&batch_labels)
                .map(|(&i, &c)| sq_euclidean(table.row(i), &centroids[c]))
                .sum(),
        );
        let shift = before
            .iter()
            .zip(&centroids)
            .map(|(a, b)| sq_euclidean(a, b).sqrt())
            .fold(0.0, f64::max);
        if shift < config.tolerance {
            break;
        }
    }
    let (labels, d2): (Vec<usize>, Vec<f64>) =
        table.rows().map(|r| nearest(r, &centroids)).unzip();
    let inertia = d2.iter().sum();
    trace.push(inertia);
    Ok(KMeansModel {
        k: config.k,
        centroids,
        labels: LabelVector::new(labels.iter().map(|&l| l as i32).collect())?,
        inertia,
        iterations,
        seed: config.seed,
        inertia_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prototype::kmeans_fit;

    fn line(points: &[f64]) -> FeatureTable {
        FeatureTable::from_rows(points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    #[test]
    fn batch_size_default() {
        assert_eq!(default_batch_size(5), 1);
        assert_eq!(default_batch_size(300), 30);
        assert_eq!(default_batch_size(100_000), 1024);
    }

    #[test]
    fn full_batch_matches_kmeans_partition() {
        let t = line(&[0.0, 0.1, 0.2, 10.0, 10.1]);
        let mut cfg = MiniBatchConfig::new(2, 5);
        cfg.batch_size = 5;
        cfg.seed = 9;
        let mb = minibatch_kmeans_fit(&t, &cfg).unwrap();
        let km = kmeans_fit(&t, 2, 9, 5, 1e-8).unwrap();
        assert_eq!(LabelVector::canonical(mb.labels.as_slice()), LabelVector::canonical(km.labels.as_slice()));
    }

    #[test]
    fn k_one_full_batch_is_the_mean() {
        let t = line(&[1.0, 2.0, 4.0, 9.0]);
        let mut cfg = MiniBatchConfig::new(1, 4);
        cfg.batch_size = 4;
        cfg.max_iterations = 7;
        let m = minibatch_kmeans_fit(&t, &cfg).unwrap();
        assert!((m.centroids[0][0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let t = line(&[0.0, 1.0, 2.0, 7.0, 8.0, 15.0, 16.0, 16.5, 3.0, 4.0]);
        let mut cfg = MiniBatchConfig::new(3, 10);
        cfg.batch_size = 3;
        cfg.seed = 77;
        let a = minibatch_kmeans_fit(&t, &cfg).unwrap();
        let b = minibatch_kmeans_fit(&t, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config() {
        let t = line(&[0.0, 1.0]);
        let mut cfg = MiniBatchConfig::new(1, 2);
        cfg.batch_size = 3;
        assert!(minibatch_kmeans_fit(&t, &cfg).is_err());
        cfg.batch_size = 1;
        cfg.k = 3;
        assert!(minibatch_kmeans_fit(&t, &cfg).is_err());
    }
}
