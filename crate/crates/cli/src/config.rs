//! Run configuration: one JSON document per run, optionally overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clustkit::dataset::{PcaTarget, SummaryAnchors};
use clustkit::hierarchy::Linkage;
use clustkit::prototype::CovarianceType;
use clustkit::select::SweepMethod;
use clustkit::Metric;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputPaths,
    /// Required exactly when time-series inputs are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<AnchorDates>,
    #[serde(default = "yes")]
    pub standardize: bool,
    #[serde(default)]
    pub reduction: Reduction,
    pub method: MethodSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub interpret: InterpretSpec,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub features: PathBuf,
    /// Columns to load; empty loads every column.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deaths: Option<PathBuf>,
}

/// Dates that define the eight time-series summary features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorDates {
    pub start: NaiveDate,
    pub first_peak: NaiveDate,
    pub last_month_start: NaiveDate,
    pub second_peak: NaiveDate,
    pub end: NaiveDate,
}

impl AnchorDates {
    pub fn paper_2020() -> Self {
        let d = |m, day| NaiveDate::from_ymd_opt(2020, m, day).unwrap();
        Self {
            start: d(1, 22),
            first_peak: d(4, 12),
            last_month_start: d(7, 8),
            second_peak: d(7, 23),
            end: d(8, 8),
        }
    }

    pub fn case_anchors(&self) -> SummaryAnchors {
        SummaryAnchors {
            growth_windows: vec![
                ("case_growth_first_peak".into(), self.start, self.first_peak),
                ("case_growth_last_month".into(), self.last_month_start, self.end),
            ],
            new_counts: vec![
                ("new_cases_first_peak".into(), self.first_peak),
                ("new_cases_second_peak".into(), self.second_peak),
            ],
            cumulative: vec![("cumulative_cases".into(), self.end)],
        }
    }

    pub fn death_anchors(&self) -> SummaryAnchors {
        SummaryAnchors {
            growth_windows: vec![],
            new_counts: vec![
                ("new_deaths_first_peak".into(), self.first_peak),
                ("new_deaths_second_peak".into(), self.second_peak),
            ],
            cumulative: vec![("cumulative_deaths".into(), self.end)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reduction {
    #[default]
    None,
    Pca { target: PcaTarget },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Kmeans {
        k: usize,
        #[serde(default = "ten")]
        restarts: usize,
    },
    Minibatch {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        batch_size: Option<usize>,
    },
    Fuzzy {
        c: usize,
        #[serde(default = "two")]
        fuzzifier: f64,
    },
    Gmm {
        k: usize,
        #[serde(default = "full")]
        covariance_type: CovarianceType,
    },
    Hierarchical {
        k: usize,
        linkage: Linkage,
        #[serde(default = "euclidean")]
        metric: Metric,
    },
    Dbscan {
        eps: f64,
        min_pts: usize,
        #[serde(default = "euclidean")]
        metric: Metric,
    },
    Optics {
        min_pts: usize,
        threshold: f64,
        #[serde(default = "euclidean")]
        metric: Metric,
    },
    Sweep {
        method: SweepMethod,
        k_min: usize,
        k_max: usize,
        #[serde(default = "ten")]
        restarts: usize,
        #[serde(default = "full")]
        covariance_type: CovarianceType,
        #[serde(default = "bic_tolerance")]
        bic_tolerance: f64,
    },
    HierarchicalGrid {
        linkages: Vec<Linkage>,
        metrics: Vec<Metric>,
        k_min: usize,
        k_max: usize,
        #[serde(default = "silhouette_threshold")]
        threshold: f64,
    },
    OpticsGrid {
        min_samples_min: usize,
        min_samples_max: usize,
        #[serde(default = "euclidean_list")]
        metrics: Vec<Metric>,
        #[serde(default = "five")]
        min_clusters: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        thresholds: Option<Vec<f64>>,
    },
}

fn ten() -> usize {
    10
}
fn five() -> usize {
    5
}
fn two() -> f64 {
    2.0
}
fn bic_tolerance() -> f64 {
    0.01
}
fn silhouette_threshold() -> f64 {
    0.5
}
fn full() -> CovarianceType {
    CovarianceType::Full
}
fn euclidean() -> Metric {
    Metric::Euclidean
}
fn euclidean_list() -> Vec<Metric> {
    vec![Metric::Euclidean]
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Kmeans { .. } => "kmeans",
            Self::Minibatch { .. } => "minibatch",
            Self::Fuzzy { .. } => "fuzzy",
            Self::Gmm { .. } => "gmm",
            Self::Hierarchical { .. } => "hierarchical",
            Self::Dbscan { .. } => "dbscan",
            Self::Optics { .. } => "optics",
            Self::Sweep { .. } => "sweep",
            Self::HierarchicalGrid { .. } => "hierarchical_grid",
            Self::OpticsGrid { .. } => "optics_grid",
        }
    }

    pub fn is_search(&self) -> bool {
        matches!(
            self,
            Self::Sweep { .. } | Self::HierarchicalGrid { .. } | Self::OpticsGrid { .. }
        )
    }

    /// The cluster count, for methods that take one.
    pub fn k(&self) -> Option<usize> {
        match self {
            Self::Kmeans { k, .. }
            | Self::Minibatch { k, .. }
            | Self::Gmm { k, .. }
            | Self::Hierarchical { k, .. } => Some(*k),
            Self::Fuzzy { c, .. } => Some(*c),
            _ => None,
        }
    }

    /// Applies `--method` and `--k`. A new method name starts from that
    /// method's defaults; for sweeps the name selects the swept method.
    pub fn with_overrides(&self, method: Option<&str>, k: Option<usize>) -> Result<Self, CliError> {
        let mut spec = self.clone();
        if let Some(name) = method {
            let keep_k = k.or(self.k());
            let need_k = |kind: &str| {
                keep_k.ok_or_else(|| CliError::Config(format!("method `{kind}` needs --k")))
            };
            spec = match (name, &spec) {
                (_, Self::Sweep { .. }) if name.parse::<SweepMethod>().is_ok() => {
                    let Self::Sweep { k_min, k_max, restarts, covariance_type, bic_tolerance, .. } = spec else {
                        unreachable!()
                    };
                    Self::Sweep {
                        method: name.parse().unwrap(),
                        k_min,
                        k_max,
                        restarts,
                        covariance_type,
                        bic_tolerance,
                    }
                }
                ("kmeans", _) => Self::Kmeans { k: need_k(name)?, restarts: 10 },
                ("minibatch", _) => Self::Minibatch { k: need_k(name)?, batch_size: None },
                ("fuzzy", _) => Self::Fuzzy { c: need_k(name)?, fuzzifier: 2.0 },
                ("gmm", _) => Self::Gmm { k: need_k(name)?, covariance_type: CovarianceType::Full },
                ("hierarchical", _) => Self::Hierarchical {
                    k: need_k(name)?,
                    linkage: Linkage::Ward,
                    metric: Metric::Euclidean,
                },
                (other, _) => {
                    return Err(CliError::Config(format!(
                        "--method `{other}` is not one of kmeans, minibatch, fuzzy, gmm, hierarchical; \
                         density methods and grids need a config"
                    )))
                }
            };
        }
        if let Some(new_k) = k {
            match &mut spec {
                Self::Kmeans { k, .. }
                | Self::Minibatch { k, .. }
                | Self::Gmm { k, .. }
                | Self::Hierarchical { k, .. } => *k = new_k,
                Self::Fuzzy { c, .. } => *c = new_k,
                other => {
                    return Err(CliError::Config(format!(
                        "--k does not apply to method `{}`",
                        other.name()
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Settings for the interpretation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpretSpec {
    pub n_trees: usize,
    pub tree_max_depth: Option<usize>,
    pub tree_min_leaf: usize,
}

impl Default for InterpretSpec {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree_max_depth: Some(4),
            tree_min_leaf: 1,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub method: Option<String>,
    pub k: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        self.method = self.method.with_overrides(o.method.as_deref(), o.k)?;
        Ok(self)
    }

    /// Checks everything that can be checked before reading data.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut files = vec![&self.input.features];
        files.extend(self.input.cases.iter());
        files.extend(self.input.deaths.iter());
        for f in files {
            if !f.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", f.display())));
            }
        }
        let has_series = self.input.cases.is_some() || self.input.deaths.is_some();
        match (&self.anchors, has_series) {
            (None, true) => {
                return Err(CliError::Config("time-series inputs need anchor dates".into()))
            }
            (Some(_), false) => {
                return Err(CliError::Config("anchor dates given without time-series inputs".into()))
            }
            _ => {}
        }
        if let Some(a) = &self.anchors {
            if !(a.start < a.first_peak && a.last_month_start < a.end && a.second_peak <= a.end) {
                return Err(CliError::Config("anchor dates are out of order".into()));
            }
        }
        let range = |lo: usize, hi: usize, what: &str| {
            if lo > hi {
                Err(CliError::Config(format!("{what}: minimum exceeds maximum")))
            } else {
                Ok(())
            }
        };
        match &self.method {
            MethodSpec::Sweep { k_min, k_max, .. } | MethodSpec::HierarchicalGrid { k_min, k_max, .. } => {
                range(*k_min, *k_max, "k range")?
            }
            MethodSpec::OpticsGrid { min_samples_min, min_samples_max, .. } => {
                range(*min_samples_min, *min_samples_max, "min_samples range")?
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "input": {"features": "f.csv", "cases": "c.csv", "deaths": "d.csv"},
        "anchors": {"start": "2020-01-22", "first_peak": "2020-04-12",
                    "last_month_start": "2020-07-08", "second_peak": "2020-07-23", "end": "2020-08-08"},
        "reduction": {"kind": "pca", "target": {"variance_ratio": 0.95}},
        "method": {"kind": "sweep", "method": "kmeans", "k_min": 2, "k_max": 12},
        "output_dir": "out",
        "seed": 7
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_json(SAMPLE).unwrap();
        assert_eq!(c.anchors, Some(AnchorDates::paper_2020()));
        assert!(c.standardize);
        assert_eq!(c.reduction, Reduction::Pca { target: PcaTarget::VarianceRatio(0.95) });
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = SAMPLE.replace(",\n        \"seed\": 7", "");
        assert!(matches!(RunConfig::from_json(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn flag_overrides() {
        let c = RunConfig::from_json(SAMPLE).unwrap();
        let o = Overrides {
            seed: Some(1),
            method: Some("gmm".into()),
            ..Default::default()
        };
        let c2 = c.clone().apply(&o).unwrap();
        assert_eq!(c2.seed, 1);
        assert!(matches!(c2.method, MethodSpec::Sweep { method: SweepMethod::Gmm, .. }));
        assert!(c.clone().apply(&Overrides { k: Some(3), ..Default::default() }).is_err());
        let o = Overrides {
            method: Some("hierarchical".into()),
            k: Some(4),
            ..Default::default()
        };
        let c3 = RunConfig { method: MethodSpec::Kmeans { k: 3, restarts: 10 }, ..c }.apply(&o).unwrap();
        assert_eq!(c3.method.k(), Some(4));
    }
}
