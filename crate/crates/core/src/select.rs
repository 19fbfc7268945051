//! Model selection over cluster counts and hyperparameter grids.
//!
//! A [`SweepReport`] stores every scored candidate in a canonical order
//! together with the rule used to pick one, so [`SweepReport::rerank`] can
//! reproduce the recommendation from the rows alone and reports over
//! disjoint sub-grids can be merged.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{optics_precomputed, DensityParams};
use crate::distance::{pairwise_distances, Metric};
use crate::error::{Error, Result};
use crate::hierarchy::{agglomerate, Linkage};
use crate::metrics::{
    bic_aic, kmeans_curve, knee_index, score_labels, ScoreReport, CALINSKI_HARABASZ,
    DAVIES_BOULDIN, SILHOUETTE,
};
use crate::prototype::{
    default_batch_size, minibatch_kmeans_fit, CovarianceType, FuzzyParams, GmmParams,
    MiniBatchConfig,
};
use crate::table::{serde_float, FeatureTable, LabelVector};

pub const DISTORTION: &str = "distortion";
pub const BIC: &str = "bic";
pub const AIC: &str = "aic";

/// Prototype method swept over `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Kmeans,
    Minibatch,
    Fuzzy,
    Gmm,
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Kmeans => "kmeans",
            Self::Minibatch => "minibatch",
            Self::Fuzzy => "fuzzy",
            Self::Gmm => "gmm",
        })
    }
}

impl std::str::FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            "minibatch" | "mini-batch" | "minibatch_kmeans" => Ok(Self::Minibatch),
            "fuzzy" | "fuzzy_cmeans" | "cmeans" => Ok(Self::Fuzzy),
            "gmm" => Ok(Self::Gmm),
            other => Err(Error::param(format!("unknown sweep method `{other}`"))),
        }
    }
}

/// Hyperparameters of one grid cell. Unused fields stay `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub linkage: Option<Linkage>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_samples: Option<usize>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        default,
        with = "opt_float"
    )]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub covariance_type: Option<CovarianceType>,
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "crate::table::serde_float")] f64);

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(W).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}

impl CandidateConfig {
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let metric = |c: &Self| c.metric.map(|m| m.to_string());
        let linkage = |c: &Self| c.linkage.map(|l| l.to_string());
        let cov = |c: &Self| c.covariance_type.map(|t| t.to_string());
        self.method
            .cmp(&other.method)
            .then_with(|| metric(self).cmp(&metric(other)))
            .then_with(|| linkage(self).cmp(&linkage(other)))
            .then_with(|| cov(self).cmp(&cov(other)))
            .then_with(|| self.min_samples.cmp(&other.min_samples))
            .then_with(|| self.k.cmp(&other.k))
            .then_with(|| match (self.threshold, other.threshold) {
                (Some(a), Some(b)) => a.total_cmp(&b),
                (a, b) => a.is_some().cmp(&b.is_some()),
            })
    }
}

impl fmt::Display for CandidateConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.method)?;
        if let Some(l) = self.linkage {
            write!(f, " linkage={l}")?;
        }
        if let Some(m) = self.metric {
            write!(f, " metric={m}")?;
        }
        if let Some(c) = self.covariance_type {
            write!(f, " covariance={c}")?;
        }
        if let Some(s) = self.min_samples {
            write!(f, " min_samples={s}")?;
        }
        if let Some(k) = self.k {
            write!(f, " k={k}")?;
        }
        if let Some(t) = self.threshold {
            write!(f, " threshold={t}")?;
        }
        Ok(())
    }
}

/// One scored grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub config: CandidateConfig,
    pub scores: ScoreReport,
    /// Why the row cannot be recommended, if it cannot.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub discarded: Option<String>,
}

impl SweepRow {
    fn score(&self, name: &str) -> Option<f64> {
        self.scores.get(name)
    }
}

/// How a report picks its recommendation from its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SelectionRule {
    /// Knee of distortion against `k`.
    DistortionKnee,
    /// Rows with BIC within `tolerance` (relative) of the minimum compete
    /// on silhouette; equal silhouettes go to the lower BIC.
    BicSilhouette { tolerance: f64 },
    /// Majority of silhouette argmax, Calinski-Harabasz argmax and
    /// Davies-Bouldin argmin; Davies-Bouldin decides when all three differ.
    IndexVote,
    /// Largest `k` whose silhouette exceeds `threshold`, then highest
    /// silhouette; silhouette argmax when nothing qualifies.
    SilhouetteThreshold {
        #[serde(with = "serde_float")]
        threshold: f64,
    },
    /// Highest silhouette among rows with at least `min_clusters` clusters,
    /// Calinski-Harabasz on ties.
    SilhouetteThenCh { min_clusters: usize },
}

/// Outcome of applying a [`SelectionRule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub config: CandidateConfig,
    /// Which branch of the rule fired.
    pub justification: String,
}

/// Scored candidates plus the recommended one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: String,
    pub rule: SelectionRule,
    /// In canonical configuration order.
    pub rows: Vec<SweepRow>,
    pub recommendation: Option<Recommendation>,
    /// Skipped cells and interpretation notes.
    pub notes: Vec<String>,
}

impl SweepReport {
    fn assemble(method: &str, rule: SelectionRule, mut rows: Vec<SweepRow>, notes: Vec<String>) -> Self {
        rows.sort_by(|a, b| a.config.canonical_cmp(&b.config));
        let mut r = Self {
            method: method.to_string(),
            rule,
            rows,
            recommendation: None,
            notes,
        };
        r.recommendation = r.rerank();
        r
    }

    /// Applies the report's rule to its rows.
    pub fn rerank(&self) -> Option<Recommendation> {
        let live: Vec<&SweepRow> = self.rows.iter().filter(|r| r.discarded.is_none()).collect();
        if live.is_empty() {
            return None;
        }
        let sil = |r: &SweepRow| r.score(SILHOUETTE).unwrap_or(f64::NEG_INFINITY);
        let pick = |r: &SweepRow, why: &str| Recommendation {
            config: r.config.clone(),
            justification: why.to_string(),
        };
        match &self.rule {
            SelectionRule::DistortionKnee => {
                let pts: Vec<(usize, f64)> = live
                    .iter()
                    .filter_map(|r| Some((r.config.k?, r.score(DISTORTION)?)))
                    .collect();
                if pts.len() < 3 {
                    return None;
                }
                let ks: Vec<usize> = pts.iter().map(|p| p.0).collect();
                let ds: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let knee = ks[knee_index(&ks, &ds)];
                live.iter()
                    .find(|r| r.config.k == Some(knee))
                    .map(|r| pick(r, "distortion knee (max distance below the normalized chord)"))
            }
            SelectionRule::BicSilhouette { tolerance } => {
                let bic = |r: &SweepRow| r.score(BIC).unwrap_or(f64::INFINITY);
                let min = live.iter().map(|r| bic(r)).fold(f64::INFINITY, f64::min);
                if !min.is_finite() {
                    return None;
                }
                let limit = min + tolerance * min.abs();
                let near: Vec<&&SweepRow> = live.iter().filter(|r| bic(r) <= limit).collect();
                let mut best = near[0];
                for r in &near[1..] {
                    if sil(r) > sil(best) || (sil(r) == sil(best) && bic(r) < bic(best)) {
                        best = r;
                    }
                }
                let why = if near.len() > 1 {
                    "near-minimal BIC, highest silhouette among them"
                } else {
                    "minimal BIC"
                };
                Some(pick(best, why))
            }
            SelectionRule::IndexVote => {
                let ch = |r: &SweepRow| r.score(CALINSKI_HARABASZ).unwrap_or(f64::NEG_INFINITY);
                let db = |r: &SweepRow| r.score(DAVIES_BOULDIN).unwrap_or(f64::INFINITY);
                let argbest = |key: &dyn Fn(&SweepRow) -> f64| {
                    let mut b = 0;
                    for (i, r) in live.iter().enumerate() {
                        if key(r) > key(live[b]) {
                            b = i;
                        }
                    }
                    b
                };
                let s = argbest(&sil);
                let c = argbest(&ch);
                let d = argbest(&|r| -db(r));
                let (winner, why) = if s == c || s == d {
                    (s, "index vote: silhouette agrees with another index")
                } else if c == d {
                    (c, "index vote: Calinski-Harabasz and Davies-Bouldin agree")
                } else {
                    (d, "index vote split: Davies-Bouldin minimum")
                };
                Some(pick(live[winner], why))
            }
            SelectionRule::SilhouetteThreshold { threshold } => {
                let qualifying: Vec<&&SweepRow> =
                    live.iter().filter(|r| sil(r) > *threshold).collect();
                if qualifying.is_empty() {
                    let mut best = live[0];
                    for r in &live[1..] {
                        if sil(r) > sil(best) {
                            best = r;
                        }
                    }
                    return Some(pick(best, "fallback: no silhouette above threshold, global maximum"));
                }
                let mut best = qualifying[0];
                for r in &qualifying[1..] {
                    let (k, kb) = (r.scores.k, best.scores.k);
                    if k > kb || (k == kb && sil(r) > sil(best)) {
                        best = r;
                    }
                }
                Some(pick(best, "largest cluster count with silhouette above threshold"))
            }
            SelectionRule::SilhouetteThenCh { .. } => {
                let ch = |r: &SweepRow| r.score(CALINSKI_HARABASZ).unwrap_or(f64::NEG_INFINITY);
                let mut best = live[0];
                for r in &live[1..] {
                    if sil(r) > sil(best) || (sil(r) == sil(best) && ch(r) > ch(best)) {
                        best = r;
                    }
                }
                Some(pick(best, "highest silhouette, Calinski-Harabasz on ties"))
            }
        }
    }

    /// Combines reports over disjoint grids of the same rule.
    pub fn merge(&self, other: &SweepReport) -> Result<SweepReport> {
        if self.method != other.method || self.rule != other.rule {
            return Err(Error::param("only reports with the same method and rule can merge"));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut notes = self.notes.clone();
        for n in &other.notes {
            if !notes.contains(n) {
                notes.push(n.clone());
            }
        }
        Ok(Self::assemble(&self.method, self.rule.clone(), rows, notes))
    }

    pub fn recommended_row(&self) -> Option<&SweepRow> {
        let rec = self.recommendation.as_ref()?;
        self.rows.iter().find(|r| r.config == rec.config)
    }

    /// One row per cell with every recorded score.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let names = [
            SILHOUETTE,
            CALINSKI_HARABASZ,
            DAVIES_BOULDIN,
            DISTORTION,
            BIC,
            AIC,
        ];
        let mut header = vec![
            "method", "k", "linkage", "metric", "min_samples", "threshold", "covariance_type",
            "n_clusters", "noise",
        ];
        header.extend(names);
        header.push("discarded");
        w.write_record(&header)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            let c = &r.config;
            let mut rec = vec![
                c.method.clone(),
                opt(c.k.map(|v| v.to_string())),
                opt(c.linkage.map(|v| v.to_string())),
                opt(c.metric.map(|v| v.to_string())),
                opt(c.min_samples.map(|v| v.to_string())),
                opt(c.threshold.map(serde_float::format)),
                opt(c.covariance_type.map(|v| v.to_string())),
                r.scores.k.to_string(),
                r.scores.noise_count.to_string(),
            ];
            rec.extend(names.iter().map(|n| opt(r.score(n).map(serde_float::format))));
            rec.push(opt(r.discarded.clone()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Density-grid rows in the published parameter-table layout.
    pub fn write_table1_csv<W: Write>(&self, out: W, reduction: &str, dims: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "reduction",
            "dims",
            "min_samples",
            "n_clusters",
            "silhouette",
            "calinski_harabasz",
            "metric",
            "silhouette_metric",
            "threshold",
        ])?;
        let opt = |v: Option<f64>| v.map(serde_float::format).unwrap_or_default();
        for r in &self.rows {
            let metric = r.config.metric.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([
                reduction.to_string(),
                dims.to_string(),
                r.config.min_samples.map(|v| v.to_string()).unwrap_or_default(),
                r.scores.k.to_string(),
                opt(r.score(SILHOUETTE)),
                opt(r.score(CALINSKI_HARABASZ)),
                metric.clone(),
                metric,
                opt(r.config.threshold),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Settings shared by the `k` sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// K-means restarts per `k`.
    pub restarts: usize,
    pub covariance_type: CovarianceType,
    /// Relative BIC slack for the silhouette tiebreak.
    pub bic_tolerance: f64,
    pub fuzzifier: f64,
    /// Mini-batch size; `None` uses the default for the row count.
    pub batch_size: Option<usize>,
    pub minibatch_iterations: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            covariance_type: CovarianceType::Full,
            bic_tolerance: 0.01,
            fuzzifier: 2.0,
            batch_size: None,
            minibatch_iterations: 100,
        }
    }
}

/// Fitted labels for one `k` of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFit {
    pub k: usize,
    pub labels: LabelVector,
}

/// Fits `method` for every `k`, scores each labelling with Euclidean
/// silhouette, Calinski-Harabasz and Davies-Bouldin, adds distortion
/// (K-means family) or BIC/AIC (mixtures) and recommends by the method's
/// rule. Also returns the labels of every fit.
pub fn sweep_k_with_labels(
    table: &FeatureTable,
    method: SweepMethod,
    k_range: &[usize],
    seed: u64,
    options: &SweepOptions,
) -> Result<(SweepReport, Vec<SweepFit>)> {
    let n = table.n_rows();
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] < 2 || *ks.last().unwrap() + 1 > n {
        return Err(Error::param(format!(
            "k values must be nonempty and within 2..={}",
            n.saturating_sub(1)
        )));
    }
    if matches!(method, SweepMethod::Kmeans | SweepMethod::Minibatch) && ks.len() < 3 {
        return Err(Error::param("a distortion knee needs at least 3 values of k"));
    }
    let d = pairwise_distances(table, Metric::Euclidean)?;
    let mut fits = Vec::with_capacity(ks.len());
    let mut extra: Vec<Vec<(&str, f64)>> = Vec::with_capacity(ks.len());
    let mut covariance = None;
    match method {
        SweepMethod::Kmeans => {
            for m in kmeans_curve(table, &ks, seed, options.restarts)? {
                extra.push(vec![(DISTORTION, m.inertia)]);
                fits.push(SweepFit { k: m.k, labels: m.labels });
            }
        }
        SweepMethod::Minibatch => {
            for &k in &ks {
                let cfg = MiniBatchConfig {
                    batch_size: options.batch_size.unwrap_or_else(|| default_batch_size(n)),
                    max_iterations: options.minibatch_iterations,
                    seed: seed.wrapping_add(k as u64),
                    ..MiniBatchConfig::new(k, n)
                };
                let m = minibatch_kmeans_fit(table, &cfg)?;
                extra.push(vec![(DISTORTION, m.inertia)]);
                fits.push(SweepFit { k, labels: m.labels });
            }
        }
        SweepMethod::Fuzzy => {
            for &k in &ks {
                let m = FuzzyParams {
                    fuzzifier: options.fuzzifier,
                    seed: seed.wrapping_add(k as u64),
                    ..FuzzyParams::new(k)
                }
                .fit(table)?;
                extra.push(vec![]);
                fits.push(SweepFit { k, labels: m.labels });
            }
        }
        SweepMethod::Gmm => {
            covariance = Some(options.covariance_type);
            for &k in &ks {
                let m = GmmParams {
                    covariance_type: options.covariance_type,
                    seed: seed.wrapping_add(k as u64),
                    ..GmmParams::new(k)
                }
                .fit(table)?;
                let (bic, aic) = bic_aic(m.final_log_likelihood(), m.n_parameters(), n);
                extra.push(vec![(BIC, bic), (AIC, aic)]);
                fits.push(SweepFit { k, labels: m.labels });
            }
        }
    }
    let rows = fits
        .iter()
        .zip(extra)
        .map(|(f, ex)| {
            let mut scores = score_labels(table, &f.labels, &d)?;
            for (name, v) in ex {
                scores.scores.insert(name.to_string(), v);
            }
            Ok(SweepRow {
                config: CandidateConfig {
                    method: method.to_string(),
                    k: Some(f.k),
                    covariance_type: covariance,
                    ..Default::default()
                },
                scores,
                discarded: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rule = match method {
        SweepMethod::Kmeans | SweepMethod::Minibatch => SelectionRule::DistortionKnee,
        SweepMethod::Gmm => SelectionRule::BicSilhouette {
            tolerance: options.bic_tolerance,
        },
        SweepMethod::Fuzzy => SelectionRule::IndexVote,
    };
    Ok((
        SweepReport::assemble(&method.to_string(), rule, rows, vec![]),
        fits,
    ))
}

/// [`sweep_k_with_labels`] without the labels.
pub fn sweep_k(
    table: &FeatureTable,
    method: SweepMethod,
    k_range: &[usize],
    seed: u64,
    options: &SweepOptions,
) -> Result<SweepReport> {
    Ok(sweep_k_with_labels(table, method, k_range, seed, options)?.0)
}

/// Silhouette (under the clustering metric), Calinski-Harabasz and
/// Davies-Bouldin for every linkage, metric and `k`. Ward with a
/// non-Euclidean metric is skipped and noted.
pub fn grid_hierarchical(
    table: &FeatureTable,
    linkages: &[Linkage],
    metrics: &[Metric],
    k_range: &[usize],
    threshold: f64,
) -> Result<SweepReport> {
    let n = table.n_rows();
    if linkages.is_empty() || metrics.is_empty() || k_range.is_empty() {
        return Err(Error::param("hierarchical grid needs linkages, metrics and k values"));
    }
    if k_range.iter().any(|&k| k < 2 || k + 1 > n) {
        return Err(Error::param(format!(
            "k values must lie within 2..={}",
            n.saturating_sub(1)
        )));
    }
    let mut notes = vec![
        "threshold rule reads 'largest number' as the largest cluster count".to_string(),
    ];
    let mut cells = Vec::new();
    for &m in metrics {
        for &l in linkages {
            if l == Linkage::Ward && m != Metric::Euclidean {
                notes.push(format!("skipped ward with metric {m}: ward needs euclidean"));
            } else {
                cells.push((m, l));
            }
        }
    }
    let matrices: Vec<(Metric, crate::distance::DistanceMatrix)> = metrics
        .iter()
        .map(|&m| Ok((m, pairwise_distances(table, m)?)))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(m, l)| {
            let d = &matrices.iter().find(|(mm, _)| *mm == m).unwrap().1;
            let tree = agglomerate(d, l)?;
            k_range
                .iter()
                .map(|&k| {
                    let labels = tree.cut(k)?;
                    Ok(SweepRow {
                        config: CandidateConfig {
                            method: "hierarchical".into(),
                            k: Some(k),
                            linkage: Some(l),
                            metric: Some(m),
                            ..Default::default()
                        },
                        scores: score_labels(table, &labels, d)?,
                        discarded: None,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport::assemble(
        "hierarchical",
        SelectionRule::SilhouetteThreshold { threshold },
        rows.into_iter().flatten().collect(),
        notes,
    ))
}

/// Deciles 0.1..0.9 of the finite, positive values (linear interpolation),
/// deduplicated.
pub fn decile_thresholds(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if v.is_empty() {
        return vec![];
    }
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..=9)
        .map(|i| {
            let pos = i as f64 / 10.0 * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        })
        .collect();
    out.dedup();
    out
}

/// Orders each metric's rows once per `min_samples` with unbounded eps,
/// extracts flat clusters at every threshold (deciles of that ordering's
/// reachabilities by default) and scores them. Candidates with fewer than
/// `min_clusters` clusters stay in the table but are discarded.
pub fn grid_optics(
    table: &FeatureTable,
    min_samples_range: &[usize],
    metrics: &[Metric],
    min_clusters: usize,
    threshold_grid: Option<&[f64]>,
) -> Result<SweepReport> {
    let n = table.n_rows();
    if min_samples_range.is_empty() || metrics.is_empty() {
        return Err(Error::param("density grid needs min_samples values and metrics"));
    }
    if min_samples_range.iter().any(|&s| s < 2 || s > n) {
        return Err(Error::param(format!("min_samples values must lie within 2..={n}")));
    }
    let mut rows = Vec::new();
    for &m in metrics {
        let d = pairwise_distances(table, m)?;
        let per: Vec<Vec<SweepRow>> = min_samples_range
            .par_iter()
            .map(|&s| {
                let order = optics_precomputed(&d, &DensityParams::new(f64::INFINITY, s, m))?;
                let thresholds = match threshold_grid {
                    Some(t) => t.to_vec(),
                    None => decile_thresholds(&order.reachability),
                };
                thresholds
                    .iter()
                    .map(|&t| {
                        let labels = order.extract_clusters(t)?;
                        let scores = score_labels(table, &labels, &d)?;
                        let discarded = (scores.k < min_clusters)
                            .then(|| format!("{} clusters, fewer than {min_clusters}", scores.k));
                        Ok(SweepRow {
                            config: CandidateConfig {
                                method: "optics".into(),
                                metric: Some(m),
                                min_samples: Some(s),
                                threshold: Some(t),
                                ..Default::default()
                            },
                            scores,
                            discarded,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        rows.extend(per.into_iter().flatten());
    }
    let notes = if threshold_grid.is_none() {
        vec!["thresholds are deciles of each ordering's finite reachabilities".to_string()]
    } else {
        vec![]
    };
    let report = SweepReport::assemble(
        "optics",
        SelectionRule::SilhouetteThenCh { min_clusters },
        rows,
        notes,
    );
    if report.recommendation.is_none() {
        return Err(Error::NoCandidate {
            rows: report.rows.len(),
            report: Box::new(report),
        });
    }
    Ok(report)
}
