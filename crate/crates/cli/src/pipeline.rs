//! Ingest, engineer, standardize, reduce, cluster, score, interpret, emit.
//!
//! Every output file is built in memory, written into a staging directory
//! next to the output directory and moved into place only once the whole
//! run has succeeded.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clustkit::dataset::{
    load_table, load_timeseries, pca_fit_transform, standardize, summarize_timeseries, PcaModel,
    StandardizationParams, TimeSeriesTable,
};
use clustkit::density::{dbscan, optics_precomputed, DensityParams, OpticsResult, PointClass};
use clustkit::hierarchy::agglomerate;
use clustkit::interpret::{
    cluster_profile, fit_tree, forest_importance, jenks_breaks, ClusterProfile, DecisionTree,
    ForestParams, ImportanceVector, TreeParams,
};
use clustkit::metrics::{bic_aic, score_labels, v_measure, ScoreReport};
use clustkit::prototype::{minibatch_kmeans_fit, FuzzyParams, GmmParams, KMeansParams, MiniBatchConfig};
use clustkit::select::{
    grid_hierarchical, grid_optics, sweep_k_with_labels, SweepOptions, SweepReport,
};
use clustkit::{pairwise_distances, Error, FeatureTable, LabelVector, Metric, NOISE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{MethodSpec, Reduction, RunConfig};
use crate::error::{CliError, Stage};
use crate::svg::Chart;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

/// Tables produced before clustering.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Engineered features in original units.
    pub features: FeatureTable,
    /// `features` after standardization (a copy when disabled).
    pub standardized: FeatureTable,
    /// Table handed to the clustering method.
    pub model_input: FeatureTable,
    pub standardization: Option<StandardizationParams>,
    pub pca: Option<PcaModel>,
    pub notes: Vec<String>,
}

/// Labels and scores of one clustering run.
#[derive(Debug, Clone)]
pub struct Clustering {
    pub labels: LabelVector,
    /// Metric used for clustering and silhouette.
    pub metric: Metric,
    pub scores: ScoreReport,
    pub sweep: Option<SweepReport>,
    pub optics: Option<OpticsResult>,
    /// Method-specific diagnostics written to `model.json`.
    pub model: serde_json::Value,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct Interpretation {
    pub profile: ClusterProfile,
    pub importance: ImportanceVector,
    pub tree: DecisionTree,
    /// `(feature, v-measure)`, best first; `None` when the feature has fewer
    /// distinct values than there are clusters.
    pub jenks: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    fn of(name: &str, data: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(data)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub files: Vec<FileEntry>,
}

/// A finished run directory.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub clustering: Option<Clustering>,
}

impl ReportBundle {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// How far a run goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Ingest,
    Cluster,
    Report,
}

fn series_summary(
    path: &Path,
    anchors: &clustkit::dataset::SummaryAnchors,
    row_ids: &[String],
) -> Result<FeatureTable, CliError> {
    let series: TimeSeriesTable = load_timeseries(path).map_err(CliError::at(Stage::Ingest))?;
    let summary = summarize_timeseries(&series, anchors).map_err(CliError::at(Stage::Engineer))?;
    let index: HashMap<&str, usize> = summary
        .table
        .row_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let order = row_ids
        .iter()
        .map(|id| {
            index.get(id.as_str()).copied().ok_or_else(|| CliError::Stage {
                stage: Stage::Engineer,
                source: Error::Malformed(format!("row `{id}` is missing from {}", path.display())),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    summary.table.select_rows(&order).map_err(CliError::at(Stage::Engineer))
}

/// Loads inputs and produces the clustering table.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    cfg.validate()?;
    let schema: Vec<&str> = cfg.input.columns.iter().map(String::as_str).collect();
    let mut features = load_table(&cfg.input.features, &schema).map_err(CliError::at(Stage::Ingest))?;
    let mut notes = Vec::new();
    if let Some(anchors) = &cfg.anchors {
        if let Some(p) = &cfg.input.cases {
            let t = series_summary(p, &anchors.case_anchors(), features.row_ids())?;
            features = features.hstack(&t).map_err(CliError::at(Stage::Engineer))?;
        }
        if let Some(p) = &cfg.input.deaths {
            let t = series_summary(p, &anchors.death_anchors(), features.row_ids())?;
            features = features.hstack(&t).map_err(CliError::at(Stage::Engineer))?;
        }
        notes.push(format!("growth rule: {}", clustkit::dataset::GROWTH_RULE));
    }
    let (standardized, standardization) = if cfg.standardize {
        let (t, p) = standardize(&features).map_err(CliError::at(Stage::Standardize))?;
        (t, Some(p))
    } else {
        (features.clone(), None)
    };
    let (model_input, pca) = match &cfg.reduction {
        Reduction::None => (standardized.clone(), None),
        Reduction::Pca { target } => {
            let (t, m) = pca_fit_transform(&standardized, *target).map_err(CliError::at(Stage::Reduce))?;
            notes.push(format!(
                "pca kept {} of {} components, cumulative variance ratio {:.4}",
                m.n_components(),
                standardized.n_cols(),
                m.cumulative_ratio()
            ));
            (t, Some(m))
        }
    };
    Ok(Prepared {
        features,
        standardized,
        model_input,
        standardization,
        pca,
        notes,
    })
}

fn recommended<'a>(report: &'a SweepReport) -> Result<&'a clustkit::select::CandidateConfig, CliError> {
    report
        .recommendation
        .as_ref()
        .map(|r| &r.config)
        .ok_or_else(|| CliError::Stage {
            stage: Stage::Cluster,
            source: Error::NoCandidate {
                rows: report.rows.len(),
                report: Box::new(report.clone()),
            },
        })
}

/// Runs the configured method, or the configured search followed by a
/// refit of its recommendation, and scores the labels.
pub fn cluster(cfg: &RunConfig, table: &FeatureTable) -> Result<Clustering, CliError> {
    let at = CliError::at;
    let seed = cfg.seed;
    let n = table.n_rows();
    let mut metric = Metric::Euclidean;
    let mut sweep = None;
    let mut optics = None;
    let (labels, model, description) = match &cfg.method {
        MethodSpec::Kmeans { k, restarts } => {
            let m = KMeansParams::new(*k)
                .with_seed(seed)
                .with_restarts(*restarts)
                .fit(table)
                .map_err(at(Stage::Cluster))?;
            let info = serde_json::json!({"inertia": m.inertia, "iterations": m.iterations, "centroids": m.centroids});
            (m.labels, info, format!("k-means, k = {k}, {restarts} restarts"))
        }
        MethodSpec::Minibatch { k, batch_size } => {
            let mut c = MiniBatchConfig::new(*k, n);
            c.seed = seed;
            if let Some(b) = batch_size {
                c.batch_size = *b;
            }
            let m = minibatch_kmeans_fit(table, &c).map_err(at(Stage::Cluster))?;
            let info = serde_json::json!({"inertia": m.inertia, "batch_size": c.batch_size, "centroids": m.centroids});
            (m.labels, info, format!("mini-batch k-means, k = {k}, batch size {}", c.batch_size))
        }
        MethodSpec::Fuzzy { c, fuzzifier } => {
            let p = FuzzyParams {
                fuzzifier: *fuzzifier,
                seed,
                ..FuzzyParams::new(*c)
            };
            let m = p.fit(table).map_err(at(Stage::Cluster))?;
            let info = serde_json::json!({"objective": m.objective, "iterations": m.iterations, "converged": m.converged, "centroids": m.centroids});
            (m.labels, info, format!("fuzzy c-means, c = {c}, m = {fuzzifier}, hardened by maximum membership"))
        }
        MethodSpec::Gmm { k, covariance_type } => {
            let p = GmmParams {
                covariance_type: *covariance_type,
                seed,
                ..GmmParams::new(*k)
            };
            let m = p.fit(table).map_err(at(Stage::Cluster))?;
            let (bic, aic) = bic_aic(m.final_log_likelihood(), m.n_parameters(), n);
            let info = serde_json::json!({
                "log_likelihood": m.final_log_likelihood(),
                "n_parameters": m.n_parameters(),
                "bic": bic,
                "aic": aic,
                "converged": m.converged,
                "iterations": m.iterations,
                "weights": m.weights,
            });
            (m.labels, info, format!("gaussian mixture, k = {k}, {covariance_type} covariance"))
        }
        MethodSpec::Hierarchical { k, linkage, metric: m } => {
            metric = *m;
            let d = pairwise_distances(table, metric).map_err(at(Stage::Cluster))?;
            let tree = agglomerate(&d, *linkage).map_err(at(Stage::Cluster))?;
            let labels = tree.cut(*k).map_err(at(Stage::Cluster))?;
            let info = serde_json::json!({"merge_heights": tree.heights(), "height_convention": tree.height_convention});
            (labels, info, format!("agglomerative, {linkage} linkage, {metric} metric, cut at k = {k}"))
        }
        MethodSpec::Dbscan { eps, min_pts, metric: m } => {
            metric = *m;
            let (labels, classes) =
                dbscan(table, &DensityParams::new(*eps, *min_pts, metric)).map_err(at(Stage::Cluster))?;
            let count = |c: PointClass| classes.iter().filter(|&&x| x == c).count();
            let info = serde_json::json!({
                "core": count(PointClass::Core),
                "border": count(PointClass::Border),
                "noise": count(PointClass::Noise),
            });
            (labels, info, format!("dbscan, eps = {eps}, min_pts = {min_pts}, {metric} metric"))
        }
        MethodSpec::Optics { min_pts, threshold, metric: m } => {
            metric = *m;
            let d = pairwise_distances(table, metric).map_err(at(Stage::Cluster))?;
            let o = optics_precomputed(&d, &DensityParams::new(f64::INFINITY, *min_pts, metric))
                .map_err(at(Stage::Cluster))?;
            let labels = o.extract_clusters(*threshold).map_err(at(Stage::Cluster))?;
            optics = Some(o);
            (
                labels,
                serde_json::json!({"threshold": threshold}),
                format!("optics, min_pts = {min_pts}, {metric} metric, extracted at reachability {threshold}"),
            )
        }
        MethodSpec::Sweep {
            method,
            k_min,
            k_max,
            restarts,
            covariance_type,
            bic_tolerance,
        } => {
            let options = SweepOptions {
                restarts: *restarts,
                covariance_type: *covariance_type,
                bic_tolerance: *bic_tolerance,
                ..SweepOptions::default()
            };
            let ks: Vec<usize> = (*k_min..=*k_max).collect();
            let (report, fits) =
                sweep_k_with_labels(table, *method, &ks, seed, &options).map_err(at(Stage::Cluster))?;
            let k = recommended(&report)?.k.expect("sweep rows carry k");
            let labels = fits.into_iter().find(|f| f.k == k).expect("fit for every k").labels;
            let why = report.recommendation.as_ref().unwrap().justification.clone();
            sweep = Some(report);
            (
                labels,
                serde_json::json!({"recommended_k": k}),
                format!("{method} sweep over k = {k_min}..{k_max}; picked k = {k} ({why})"),
            )
        }
        MethodSpec::HierarchicalGrid {
            linkages,
            metrics,
            k_min,
            k_max,
            threshold,
        } => {
            let ks: Vec<usize> = (*k_min..=*k_max).collect();
            let report =
                grid_hierarchical(table, linkages, metrics, &ks, *threshold).map_err(at(Stage::Cluster))?;
            let best = recommended(&report)?.clone();
            metric = best.metric.expect("grid rows carry a metric");
            let d = pairwise_distances(table, metric).map_err(at(Stage::Cluster))?;
            let tree = agglomerate(&d, best.linkage.expect("grid rows carry a linkage"))
                .map_err(at(Stage::Cluster))?;
            let labels = tree.cut(best.k.expect("grid rows carry k")).map_err(at(Stage::Cluster))?;
            let why = report.recommendation.as_ref().unwrap().justification.clone();
            sweep = Some(report);
            (labels, serde_json::to_value(&best).unwrap(), format!("hierarchical grid; picked {best} ({why})"))
        }
        MethodSpec::OpticsGrid {
            min_samples_min,
            min_samples_max,
            metrics,
            min_clusters,
            thresholds,
        } => {
            let range: Vec<usize> = (*min_samples_min..=*min_samples_max).collect();
            let report = grid_optics(table, &range, metrics, *min_clusters, thresholds.as_deref())
                .map_err(at(Stage::Cluster))?;
            let best = recommended(&report)?.clone();
            metric = best.metric.expect("grid rows carry a metric");
            let d = pairwise_distances(table, metric).map_err(at(Stage::Cluster))?;
            let params = DensityParams::new(f64::INFINITY, best.min_samples.expect("min_samples"), metric);
            let o = optics_precomputed(&d, &params).map_err(at(Stage::Cluster))?;
            let labels = o
                .extract_clusters(best.threshold.expect("threshold"))
                .map_err(at(Stage::Cluster))?;
            optics = Some(o);
            let why = report.recommendation.as_ref().unwrap().justification.clone();
            sweep = Some(report);
            (labels, serde_json::to_value(&best).unwrap(), format!("optics grid; picked {best} ({why})"))
        }
    };
    let d = pairwise_distances(table, metric).map_err(CliError::at(Stage::Score))?;
    let scores = score_labels(table, &labels, &d).map_err(CliError::at(Stage::Score))?;
    Ok(Clustering {
        labels,
        metric,
        scores,
        sweep,
        optics,
        model,
        description,
    })
}

/// Profiles on the standardized features; forest, tree and Jenks screen on
/// the original units so thresholds read naturally.
pub fn interpret(
    cfg: &RunConfig,
    prepared: &Prepared,
    labels: &LabelVector,
) -> Result<Interpretation, CliError> {
    let profile = cluster_profile(&prepared.standardized, labels).map_err(CliError::at(Stage::Interpret))?;
    let tree_params = TreeParams {
        max_depth: cfg.interpret.tree_max_depth,
        min_leaf: cfg.interpret.tree_min_leaf,
    };
    let forest = ForestParams {
        tree: tree_params.clone(),
        ..ForestParams::new(cfg.interpret.n_trees, cfg.seed)
    };
    let importance =
        forest_importance(&prepared.features, labels, &forest).map_err(CliError::at(Stage::Interpret))?;
    let tree = fit_tree(&prepared.features, labels, &tree_params).map_err(CliError::at(Stage::Interpret))?;

    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != NOISE).collect();
    let truth = LabelVector::new(keep.iter().map(|&i| labels[i]).collect()).map_err(CliError::at(Stage::Interpret))?;
    let k = labels.n_clusters();
    let mut jenks = Vec::new();
    for (j, name) in prepared.features.columns().iter().enumerate() {
        let values: Vec<f64> = keep.iter().map(|&i| prepared.features.get(i, j)).collect();
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < k {
            jenks.push((name.clone(), None));
            continue;
        }
        let breaks = jenks_breaks(&values, k).map_err(CliError::at(Stage::Interpret))?;
        let classes = LabelVector::new(values.iter().map(|&v| breaks.classify(v) as i32).collect())
            .map_err(CliError::at(Stage::Interpret))?;
        let v = v_measure(&truth, &classes).map_err(CliError::at(Stage::Interpret))?;
        jenks.push((name.clone(), Some(v)));
    }
    jenks.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (x, y) => y.is_some().cmp(&x.is_some()),
    });
    Ok(Interpretation {
        profile,
        importance,
        tree,
        jenks,
    })
}

/// Named output files in emission order.
#[derive(Default)]
struct Files(Vec<(String, Vec<u8>)>);

impl Files {
    fn add(&mut self, name: &str, data: impl Into<Vec<u8>>) {
        self.0.push((name.to_string(), data.into()));
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> clustkit::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::at(Stage::Emit))?;
        self.add(name, buf);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) {
        let mut s = serde_json::to_string_pretty(v).expect("serializable");
        s.push('\n');
        self.add(name, s);
    }
}

#[derive(Serialize)]
struct ScoresFile<'a> {
    metric: String,
    table: &'a str,
    #[serde(flatten)]
    report: &'a ScoreReport,
}

fn emit_prepared(files: &mut Files, p: &Prepared) -> Result<(), CliError> {
    files.csv("features.csv", |b| p.features.write_csv(b, "row_id"))?;
    files.csv("standardized.csv", |b| p.standardized.write_csv(b, "row_id"))?;
    files.csv("model_input.csv", |b| p.model_input.write_csv(b, "row_id"))?;
    if let Some(s) = &p.standardization {
        files.json("standardization.json", s);
    }
    if let Some(m) = &p.pca {
        files.json("pca.json", m);
    }
    Ok(())
}

fn normalized(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let finite = points.iter().map(|p| p.1).filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    points.iter().map(|&(x, y)| (x, (y - lo) / span)).collect()
}

fn emit_clustering(files: &mut Files, cfg: &RunConfig, p: &Prepared, c: &Clustering) -> Result<(), CliError> {
    let ids = p.model_input.row_ids();
    files.csv("labels.csv", |b| c.labels.write_csv(b, ids))?;
    files.json(
        "scores.json",
        &ScoresFile {
            metric: c.metric.to_string(),
            table: "model_input.csv",
            report: &c.scores,
        },
    );
    files.json("model.json", &c.model);
    if let Some(o) = &c.optics {
        files.csv("reachability.csv", |b| o.write_csv(b, ids))?;
        let chart = Chart {
            title: "Reachability plot",
            x_label: "ordering position",
            y_label: "reachability distance",
        };
        files.add("reachability.svg", chart.bars(&o.reachability_plot()));
    }
    if let Some(r) = &c.sweep {
        files.json("sweep.json", r);
        files.csv("sweep.csv", |b| r.write_csv(b))?;
        if let MethodSpec::OpticsGrid { .. } = cfg.method {
            let reduction = match cfg.reduction {
                Reduction::None => "none",
                Reduction::Pca { .. } => "pca",
            };
            files.csv("table1.csv", |b| r.write_table1_csv(b, reduction, p.model_input.n_cols()))?;
        }
        if let MethodSpec::Sweep { .. } = cfg.method {
            let mut names: Vec<&String> = r.rows.iter().flat_map(|row| row.scores.scores.keys()).collect();
            names.sort();
            names.dedup();
            let series: Vec<(String, Vec<(f64, f64)>)> = names
                .iter()
                .map(|name| {
                    let pts: Vec<(f64, f64)> = r
                        .rows
                        .iter()
                        .filter_map(|row| Some((row.config.k? as f64, row.scores.get(name)?)))
                        .collect();
                    (name.to_string(), normalized(&pts))
                })
                .collect();
            let chart = Chart {
                title: "Scores against k (min-max normalized)",
                x_label: "k",
                y_label: "normalized score",
            };
            files.add("sweep.svg", chart.lines(&series));
        }
    }
    Ok(())
}

fn emit_interpretation(files: &mut Files, i: &Interpretation) -> Result<(), CliError> {
    files.csv("profile.csv", |b| i.profile.write_csv(b))?;
    files.csv("importance.csv", |b| i.importance.write_csv(b))?;
    files.add("tree.txt", i.tree.render_text());
    files.add("tree.dot", i.tree.render_dot());
    let mut jenks = String::from("feature,v_measure\n");
    for (name, v) in &i.jenks {
        let v = v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(jenks, "{name},{v}").unwrap();
    }
    files.add("jenks.csv", jenks);
    Ok(())
}

fn summary(cfg: &RunConfig, p: &Prepared, c: &Clustering, i: Option<&Interpretation>, notes: &[String]) -> String {
    let mut s = String::new();
    writeln!(s, "# Clustering report\n").unwrap();
    writeln!(s, "- rows: {}", p.features.n_rows()).unwrap();
    writeln!(s, "- engineered features: {}", p.features.n_cols()).unwrap();
    writeln!(s, "- clustering input columns: {}", p.model_input.n_cols()).unwrap();
    writeln!(s, "- seed: {}", cfg.seed).unwrap();
    writeln!(s, "- method: {}", c.description).unwrap();
    writeln!(s, "- clusters: {} (noise rows: {})", c.scores.k, c.scores.noise_count).unwrap();
    writeln!(s, "\n## Scores ({} metric)\n", c.metric).unwrap();
    for (name, v) in &c.scores.scores {
        writeln!(s, "- {name}: {v:.6}").unwrap();
    }
    for f in &c.scores.flags {
        writeln!(s, "- note: {f}").unwrap();
    }
    let sizes = c.labels.members();
    writeln!(s, "\n## Cluster sizes\n").unwrap();
    for (id, m) in c.labels.cluster_ids().iter().zip(sizes.iter().filter(|m| !m.is_empty())) {
        writeln!(s, "- cluster {id}: {}", m.len()).unwrap();
    }
    if let Some(i) = i {
        writeln!(s, "\n## Most important features\n").unwrap();
        for (name, v) in i.importance.ranked().iter().take(5) {
            writeln!(s, "- {name}: {v:.4}").unwrap();
        }
        writeln!(
            s,
            "\nDecision tree: depth {}, {} leaves (see tree.txt).",
            i.tree.depth(),
            i.tree.n_leaves()
        )
        .unwrap();
    }
    if !notes.is_empty() {
        writeln!(s, "\n## Notes\n").unwrap();
        for n in notes {
            writeln!(s, "- {n}").unwrap();
        }
    }
    s
}

fn input_entries(cfg: &RunConfig) -> Result<Vec<FileEntry>, CliError> {
    let mut paths = vec![&cfg.input.features];
    paths.extend(cfg.input.cases.iter());
    paths.extend(cfg.input.deaths.iter());
    paths
        .into_iter()
        .map(|p| {
            let data = std::fs::read(p).map_err(|e| CliError::Stage {
                stage: Stage::Ingest,
                source: Error::Io {
                    path: p.clone(),
                    source: e,
                },
            })?;
            Ok(FileEntry::of(&p.display().to_string(), &data))
        })
        .collect()
}

fn write_bundle(cfg: &RunConfig, command: &str, files: Files) -> Result<(PathBuf, Manifest), CliError> {
    let out = &cfg.output_dir;
    let output_err = |path: &Path, source: std::io::Error| CliError::Output {
        stage: Stage::Emit,
        path: path.display().to_string(),
        source,
    };
    if out.exists() {
        let previous_bundle = out.join(MANIFEST).is_file();
        let empty = std::fs::read_dir(out)
            .map_err(|e| output_err(out, e))?
            .next()
            .is_none();
        if !(previous_bundle || empty) {
            return Err(CliError::Config(format!(
                "output directory {} exists and is not a previous run",
                out.display()
            )));
        }
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| output_err(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".clustkit-staging-")
        .tempdir_in(&parent)
        .map_err(|e| output_err(&parent, e))?;
    let mut entries = Vec::new();
    for (name, data) in &files.0 {
        let path = staging.path().join(name);
        std::fs::write(&path, data).map_err(|e| output_err(&path, e))?;
        entries.push(FileEntry::of(name, data));
    }
    let manifest = Manifest {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        command: command.to_string(),
        config: cfg.clone(),
        inputs: input_entries(cfg)?,
        files: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(staging.path().join(MANIFEST), text).map_err(|e| output_err(staging.path(), e))?;
    if out.exists() {
        std::fs::remove_dir_all(out).map_err(|e| output_err(out, e))?;
    }
    let staged = staging.keep();
    std::fs::rename(&staged, out).map_err(|e| {
        let _ = std::fs::remove_dir_all(&staged);
        output_err(out, e)
    })?;
    Ok((out.clone(), manifest))
}

/// Runs the pipeline up to `scope` and writes a bundle into the configured
/// output directory. On failure nothing is left behind.
pub fn run(cfg: &RunConfig, scope: Scope) -> Result<ReportBundle, CliError> {
    let prepared = prepare(cfg)?;
    let mut files = Files::default();
    let mut notes = prepared.notes.clone();
    emit_prepared(&mut files, &prepared)?;
    let mut clustering = None;
    if scope != Scope::Ingest {
        let c = cluster(cfg, &prepared.model_input)?;
        if let Some(r) = &c.sweep {
            notes.extend(r.notes.iter().cloned());
        }
        emit_clustering(&mut files, cfg, &prepared, &c)?;
        let interpretation = if scope == Scope::Report {
            if c.labels.n_clusters() >= 2 {
                let i = interpret(cfg, &prepared, &c.labels)?;
                emit_interpretation(&mut files, &i)?;
                Some(i)
            } else {
                notes.push("interpretation skipped: fewer than 2 clusters".into());
                None
            }
        } else {
            None
        };
        files.add("summary.md", summary(cfg, &prepared, &c, interpretation.as_ref(), &notes));
        clustering = Some(c);
    }
    let command = match scope {
        Scope::Ingest => "ingest",
        Scope::Cluster => "cluster",
        Scope::Report => "report",
    };
    let (dir, manifest) = write_bundle(cfg, command, files)?;
    Ok(ReportBundle {
        dir,
        manifest,
        clustering,
    })
}

/// Reads a `row_id,cluster` table and aligns it to `row_ids`.
pub fn read_labels(path: &Path, row_ids: &[String]) -> Result<LabelVector, CliError> {
    let at = || CliError::at(Stage::Ingest);
    let mut rdr = csv::Reader::from_path(path).map_err(|e| at()(Error::Csv(e)))?;
    let mut by_id = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| at()(Error::Csv(e)))?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        let cell = rec.get(1).unwrap_or("").trim();
        let label: i32 = cell.parse().map_err(|_| {
            at()(Error::BadCell {
                row: id.clone(),
                column: "cluster".into(),
                value: cell.to_string(),
                reason: "not an integer",
            })
        })?;
        if by_id.insert(id.clone(), label).is_some() {
            return Err(at()(Error::DuplicateRow(id)));
        }
    }
    let labels = row_ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| at()(Error::Malformed(format!("no label for row `{id}`"))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    LabelVector::new(labels).map_err(at())
}

/// Interprets externally supplied labels against the configured features.
pub fn run_interpret(cfg: &RunConfig, labels_path: &Path) -> Result<ReportBundle, CliError> {
    let prepared = prepare(cfg)?;
    let labels = read_labels(labels_path, prepared.features.row_ids())?;
    let i = interpret(cfg, &prepared, &labels)?;
    let mut files = Files::default();
    emit_interpretation(&mut files, &i)?;
    let (dir, manifest) = write_bundle(cfg, "interpret", files)?;
    Ok(ReportBundle {
        dir,
        manifest,
        clustering: None,
    })
}
