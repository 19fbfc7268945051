//! Internal validity indices, mixture information criteria, distortion knee
//! detection and v-measure agreement.
//!
//! Noise rows (`-1`) are left out of every internal index. Degenerate cases
//! that still have a defined limit (zero within-cluster spread, coincident
//! centroids) score `+inf` instead of failing.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{pairwise_distances, sq_euclidean, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::prototype::{lloyd, GmmModel, KMeansModel, KMeansParams};
use crate::table::{serde_float, FeatureTable, LabelVector};

pub const SILHOUETTE: &str = "silhouette";
pub const CALINSKI_HARABASZ: &str = "calinski_harabasz";
pub const DAVIES_BOULDIN: &str = "davies_bouldin";

/// Scored rows grouped by cluster, with cluster ids mapped to `0..k`.
struct Groups {
    rows: Vec<usize>,
    cluster: Vec<usize>,
    k: usize,
}

impl Groups {
    fn new(labels: &LabelVector, n: usize) -> Result<Self> {
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        let ids = labels.cluster_ids();
        let mut rows = Vec::new();
        let mut cluster = Vec::new();
        for (i, &l) in labels.as_slice().iter().enumerate() {
            if l >= 0 {
                rows.push(i);
                cluster.push(ids.binary_search(&l).unwrap());
            }
        }
        Ok(Self {
            rows,
            cluster,
            k: ids.len(),
        })
    }

    fn need_two(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::TooFewClusters {
                needed: 2,
                found: self.k,
            });
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &c in &self.cluster {
            s[c] += 1;
        }
        s
    }

    fn centroids(&self, table: &FeatureTable) -> Vec<Vec<f64>> {
        let d = table.n_cols();
        let sizes = self.sizes();
        let mut c = vec![vec![0.0; d]; self.k];
        for (&r, &g) in self.rows.iter().zip(&self.cluster) {
            for (a, x) in c[g].iter_mut().zip(table.row(r)) {
                *a += x;
            }
        }
        for (ctr, &s) in c.iter_mut().zip(&sizes) {
            ctr.iter_mut().for_each(|v| *v /= s as f64);
        }
        c
    }
}

/// Mean silhouette of non-noise rows under `metric`. Rows in singleton
/// clusters score 0.
pub fn silhouette(table: &FeatureTable, labels: &LabelVector, metric: Metric) -> Result<f64> {
    let g = Groups::new(labels, table.n_rows())?;
    g.need_two()?;
    let d = pairwise_distances(table, metric)?;
    silhouette_precomputed(&d, labels)
}

/// Silhouette from a distance matrix over the same rows as `labels`.
pub fn silhouette_precomputed(d: &DistanceMatrix, labels: &LabelVector) -> Result<f64> {
    let g = Groups::new(labels, d.n())?;
    g.need_two()?;
    let sizes = g.sizes();
    let per_point: Vec<f64> = (0..g.rows.len())
        .into_par_iter()
        .map(|a| {
            let own = g.cluster[a];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; g.k];
            for (b, &rb) in g.rows.iter().enumerate() {
                if a != b {
                    sums[g.cluster[b]] += d.get(g.rows[a], rb);
                }
            }
            let intra = sums[own] / (sizes[own] - 1) as f64;
            let inter = (0..g.k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = intra.max(inter);
            if denom == 0.0 {
                0.0
            } else {
                (inter - intra) / denom
            }
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / per_point.len() as f64)
}

/// Between-to-within dispersion ratio. `+inf` when every cluster has zero
/// spread.
pub fn calinski_harabasz(table: &FeatureTable, labels: &LabelVector) -> Result<f64> {
    let g = Groups::new(labels, table.n_rows())?;
    g.need_two()?;
    let n = g.rows.len();
    if g.k > n - 1 {
        return Err(Error::param(format!(
            "{CALINSKI_HARABASZ}: {} clusters need more than {n} scored rows",
            g.k
        )));
    }
    let centroids = g.centroids(table);
    let sizes = g.sizes();
    let d = table.n_cols();
    let mut mean = vec![0.0; d];
    for &r in &g.rows {
        for (m, x) in mean.iter_mut().zip(table.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let between: f64 = centroids
        .iter()
        .zip(&sizes)
        .map(|(c, &s)| s as f64 * sq_euclidean(c, &mean))
        .sum();
    let within: f64 = g
        .rows
        .iter()
        .zip(&g.cluster)
        .map(|(&r, &c)| sq_euclidean(table.row(r), &centroids[c]))
        .sum();
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (g.k - 1) as f64) / (within / (n - g.k) as f64))
}

/// Mean over clusters of the worst `(s_i + s_j) / |c_i - c_j|` ratio, with
/// `s` the mean Euclidean distance to the centroid. `+inf` when two
/// centroids coincide.
pub fn davies_bouldin(table: &FeatureTable, labels: &LabelVector) -> Result<f64> {
    let g = Groups::new(labels, table.n_rows())?;
    g.need_two()?;
    let centroids = g.centroids(table);
    let sizes = g.sizes();
    let mut scatter = vec![0.0; g.k];
    for (&r, &c) in g.rows.iter().zip(&g.cluster) {
        scatter[c] += sq_euclidean(table.row(r), &centroids[c]).sqrt();
    }
    for (s, &n) in scatter.iter_mut().zip(&sizes) {
        *s /= n as f64;
    }
    let mut total = 0.0;
    for i in 0..g.k {
        let mut worst = 0.0f64;
        for j in 0..g.k {
            if i == j {
                continue;
            }
            let gap = sq_euclidean(&centroids[i], &centroids[j]).sqrt();
            let ratio = if gap == 0.0 {
                f64::INFINITY
            } else {
                (scatter[i] + scatter[j]) / gap
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / g.k as f64)
}

/// Validity scores of one labelling plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(with = "serde_float::map")]
    pub scores: BTreeMap<String, f64>,
    /// Notes on degenerate or skipped indices.
    pub flags: Vec<String>,
    /// Non-noise clusters.
    pub k: usize,
    pub noise_count: usize,
    pub rows_scored: usize,
}

impl ScoreReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.scores.get(name).copied()
    }
}

/// Silhouette (under `d`'s metric), Calinski-Harabasz and Davies-Bouldin.
/// Indices that are undefined for this labelling are omitted and flagged
/// rather than failing.
pub fn score_labels(table: &FeatureTable, labels: &LabelVector, d: &DistanceMatrix) -> Result<ScoreReport> {
    let g = Groups::new(labels, table.n_rows())?;
    if d.n() != table.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: table.n_rows(),
            found: d.n(),
        });
    }
    let mut report = ScoreReport {
        scores: BTreeMap::new(),
        flags: Vec::new(),
        k: g.k,
        noise_count: labels.noise_count(),
        rows_scored: g.rows.len(),
    };
    if report.noise_count > 0 {
        report
            .flags
            .push(format!("{} noise rows excluded", report.noise_count));
    }
    if g.k < 2 {
        report.flags.push("fewer than 2 clusters: indices undefined".into());
        return Ok(report);
    }
    report
        .scores
        .insert(SILHOUETTE.into(), silhouette_precomputed(d, labels)?);
    match calinski_harabasz(table, labels) {
        Ok(v) => {
            if v.is_infinite() {
                report.flags.push("calinski_harabasz infinite: zero within-cluster spread".into());
            }
            report.scores.insert(CALINSKI_HARABASZ.into(), v);
        }
        Err(_) => report
            .flags
            .push("calinski_harabasz undefined: every row is its own cluster".into()),
    }
    let db = davies_bouldin(table, labels)?;
    if db.is_infinite() {
        report.flags.push("davies_bouldin infinite: coincident centroids".into());
    }
    report.scores.insert(DAVIES_BOULDIN.into(), db);
    Ok(report)
}

/// Distortion curve over `k` with its knee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeResult {
    pub evaluated_k: Vec<usize>,
    pub scores: Vec<f64>,
    pub knee_k: usize,
}

/// Best-of-restarts K-means inertia for each `k` and the knee of that
/// curve. Each `k` is also warm-started from the previous `k`'s centroids
/// plus the worst-fit rows, so the curve never increases.
pub fn distortion_knee(
    table: &FeatureTable,
    k_range: &[usize],
    seed: u64,
    restarts: usize,
) -> Result<KneeResult> {
    if k_range.len() < 3 {
        return Err(Error::param("knee detection needs at least 3 values of k"));
    }
    let scores: Vec<f64> = kmeans_curve(table, k_range, seed, restarts)?
        .iter()
        .map(|m| m.inertia)
        .collect();
    let knee_k = k_range[knee_index(k_range, &scores)];
    Ok(KneeResult {
        evaluated_k: k_range.to_vec(),
        scores,
        knee_k,
    })
}

/// Best K-means model per `k` (strictly increasing), each also
/// warm-started from the previous model so inertia never increases.
pub(crate) fn kmeans_curve(
    table: &FeatureTable,
    k_range: &[usize],
    seed: u64,
    restarts: usize,
) -> Result<Vec<KMeansModel>> {
    if k_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("k values must be strictly increasing"));
    }
    let n = table.n_rows();
    if k_range.first() == Some(&0) || k_range.last().is_some_and(|&k| k > n) {
        return Err(Error::param(format!("k values must lie in 1..={n}")));
    }
    let mut models: Vec<KMeansModel> = Vec::with_capacity(k_range.len());
    for &k in k_range {
        let params = KMeansParams::new(k)
            .with_seed(seed.wrapping_add(k as u64))
            .with_restarts(restarts);
        let mut best = params.fit(table)?;
        if let Some(prev) = models.last() {
            let start = extend_centroids(table, prev.centroids.clone(), k);
            let warm = lloyd(table, start, params.max_iterations, params.tolerance);
            if warm.inertia < best.inertia {
                best = warm.into_model(params.seed);
            }
        }
        models.push(best);
    }
    Ok(models)
}

// Adds the rows farthest from their nearest centroid until there are k.
fn extend_centroids(table: &FeatureTable, mut centroids: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    let mut far: Vec<f64> = table
        .rows()
        .map(|r| crate::prototype::nearest(r, &centroids).1)
        .collect();
    while centroids.len() < k {
        let (idx, _) = far
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b });
        let c = table.row(idx).to_vec();
        for (f, r) in far.iter_mut().zip(table.rows()) {
            *f = f.min(sq_euclidean(r, &c));
        }
        far[idx] = f64::NEG_INFINITY;
        centroids.push(c);
    }
    centroids
}

/// Index of the point farthest below the chord joining the first and last
/// points, on axes scaled to `[0, 1]`. Flat curves give index 0.
pub fn knee_index(xs: &[usize], ys: &[f64]) -> usize {
    let n = xs.len();
    let (x0, x1) = (xs[0] as f64, xs[n - 1] as f64);
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || x1 == x0 {
        return 0;
    }
    let nx = |x: usize| (x as f64 - x0) / (x1 - x0);
    let ny = |y: f64| (y - lo) / (hi - lo);
    let (ya, yb) = (ny(ys[0]), ny(ys[n - 1]));
    let mut best = (0, 0.0);
    for i in 1..n - 1 {
        let x = nx(xs[i]);
        let chord = ya + (yb - ya) * x;
        let below = chord - ny(ys[i]);
        if below > best.1 {
            best = (i, below);
        }
    }
    best.0
}

/// `(bic, aic)` from a log-likelihood, parameter count and row count.
pub fn bic_aic(log_likelihood: f64, n_parameters: usize, n_rows: usize) -> (f64, f64) {
    let p = n_parameters as f64;
    (
        -2.0 * log_likelihood + p * (n_rows as f64).ln(),
        -2.0 * log_likelihood + 2.0 * p,
    )
}

/// `(bic, aic)` of a fitted mixture on `table`.
pub fn information_criteria(model: &GmmModel, table: &FeatureTable) -> Result<(f64, f64)> {
    let ll = model.log_likelihood(table)?;
    Ok(bic_aic(ll, model.n_parameters(), table.n_rows()))
}

/// Homogeneity, completeness and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

/// Agreement of two labellings. Rows that are noise in either are dropped.
pub fn v_measure(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    Ok(v_measure_parts(a, b)?.v_measure)
}

pub fn v_measure_parts(a: &LabelVector, b: &LabelVector) -> Result<VMeasure> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut joint: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    let mut ca: BTreeMap<i32, f64> = BTreeMap::new();
    let mut cb: BTreeMap<i32, f64> = BTreeMap::new();
    let mut n = 0.0;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        if x < 0 || y < 0 {
            continue;
        }
        *joint.entry((x, y)).or_default() += 1.0;
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
        n += 1.0;
    }
    if n == 0.0 {
        return Err(Error::param("no rows left after dropping noise"));
    }
    let entropy = |m: &BTreeMap<i32, f64>| -> f64 {
        m.values().map(|&c| -(c / n) * (c / n).ln()).sum()
    };
    let (ha, hb) = (entropy(&ca), entropy(&cb));
    // H(A|B) = -Σ p(a,b) ln(p(a,b)/p(b))
    let mut h_a_given_b = 0.0;
    let mut h_b_given_a = 0.0;
    for (&(x, y), &c) in &joint {
        let p = c / n;
        h_a_given_b -= p * (c / cb[&y]).ln();
        h_b_given_a -= p * (c / ca[&x]).ln();
    }
    let homogeneity = if ha == 0.0 { 1.0 } else { 1.0 - h_a_given_b / ha };
    let completeness = if hb == 0.0 { 1.0 } else { 1.0 - h_b_given_a / hb };
    let v_measure = if homogeneity <= 0.0 || completeness <= 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok(VMeasure {
        homogeneity,
        completeness,
        v_measure,
    })
}
