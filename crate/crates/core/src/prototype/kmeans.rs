use serde::{Deserialize, Serialize};

use super::{check_k, cluster_means, init_centroids, nearest, rng_from_seed, Assign, Init};
use crate::distance::sq_euclidean;
use crate::error::{Error, Result};
use crate::table::{FeatureTable, LabelVector};

/// K-means hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    /// Independent seeded runs; the lowest-inertia run wins.
    pub restarts: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init: Init,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            seed: 0,
            restarts: 10,
            tolerance: 1e-8,
            max_iterations: 300,
            init: Init::KMeansPlusPlus,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn fit(&self, table: &FeatureTable) -> Result<KMeansModel> {
        check_k(self.k, table.n_rows())?;
        if !(self.tolerance > 0.0) {
            return Err(Error::param("tolerance must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts must be at least 1"));
        }
        let mut rng = rng_from_seed(self.seed);
        let mut best: Option<LloydRun> = None;
        for _ in 0..self.restarts {
            let start = init_centroids(table, self.k, self.init, &mut rng);
            let run = lloyd(table, start, self.max_iterations, self.tolerance);
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        Ok(best.unwrap().into_model(self.seed))
    }
}

/// Fitted K-means partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub labels: LabelVector,
    /// Sum of squared distances from rows to their centroid.
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after each assignment step of the winning run; the last
    /// entry is the final inertia.
    pub inertia_trace: Vec<f64>,
}

impl Assign for KMeansModel {
    fn assign(&self, table: &FeatureTable) -> Result<LabelVector> {
        let d = self.centroids.first().map_or(0, Vec::len);
        if table.n_cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: table.n_cols(),
            });
        }
        LabelVector::new(
            table
                .rows()
                .map(|r| nearest(r, &self.centroids).0 as i32)
                .collect(),
        )
    }
}

/// Convenience wrapper around [`KMeansParams`].
pub fn kmeans_fit(
    table: &FeatureTable,
    k: usize,
    seed: u64,
    restarts: usize,
    tolerance: f64,
) -> Result<KMeansModel> {
    KMeansParams::new(k)
        .with_seed(seed)
        .with_restarts(restarts)
        .with_tolerance(tolerance)
        .fit(table)
}

pub(crate) struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

impl LloydRun {
    pub(crate) fn into_model(self, seed: u64) -> KMeansModel {
        KMeansModel {
            k: self.centroids.len(),
            labels: LabelVector::new(self.labels.iter().map(|&l| l as i32).collect())
                .expect("labels are nonnegative"),
            centroids: self.centroids,
            inertia: self.inertia,
            iterations: self.iterations,
            seed,
            inertia_trace: self.trace,
        }
    }
}

fn assign_all(table: &FeatureTable, centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    table.rows().map(|r| nearest(r, centroids)).unzip()
}

fn inertia_of(table: &FeatureTable, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    table
        .rows()
        .zip(labels)
        .map(|(r, &l)| sq_euclidean(r, &centroids[l]))
        .sum()
}

/// Lloyd iterations from the given centroids. Empty clusters are reseeded
/// at the row farthest from its own centroid.
pub(crate) fn lloyd(
    table: &FeatureTable,
    mut centroids: Vec<Vec<f64>>,
    max_iterations: usize,
    tolerance: f64,
) -> LloydRun {
    let mut labels: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iterations.max(1) {
        iterations += 1;
        let (next, d2) = assign_all(table, &centroids);
        trace.push(d2.iter().sum());
        if next == labels {
            break;
        }
        labels = next;
        let (mut updated, counts) = cluster_means(table, &labels, &centroids);
        repair_empty(table, &labels, &counts, &mut updated);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_euclidean(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < tolerance {
            break;
        }
    }
    // Close with an assignment plus mean update so the reported centroids
    // are exactly the means of the reported labels.
    let (final_labels, _) = assign_all(table, &centroids);
    if final_labels != labels {
        labels = final_labels;
        centroids = cluster_means(table, &labels, &centroids).0;
    }
    let inertia = inertia_of(table, &labels, &centroids);
    trace.push(inertia);
    LloydRun {
        centroids,
        labels,
        inertia,
        iterations,
        trace,
    }
}

fn repair_empty(
    table: &FeatureTable,
    labels: &[usize],
    counts: &[usize],
    centroids: &mut [Vec<f64>],
) {
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut far: Vec<f64> = table
        .rows()
        .zip(labels)
        .map(|(r, &l)| sq_euclidean(r, &centroids[l]))
        .collect();
    for (c, _) in counts.iter().enumerate().filter(|(_, &n)| n == 0) {
        let (idx, _) = far
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        centroids[c] = table.row(idx).to_vec();
        far[idx] = f64::NEG_INFINITY;
    }
}
