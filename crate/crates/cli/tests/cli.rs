use std::path::{Path, PathBuf};
use std::process::Command;

use clustkit::metrics::score_labels;
use clustkit::{pairwise_distances, FeatureTable, LabelVector, Metric};
use clustkit_cli::config::{AnchorDates, InputPaths, InterpretSpec};
use clustkit_cli::{MethodSpec, Reduction, RunConfig};

fn clustkit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_clustkit")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn synth(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let (code, err) = clustkit(&["synth", "--rows", "80", "--seed", "2", "--out", data.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    data
}

fn write_config(dir: &Path, data: &Path, method: MethodSpec) -> PathBuf {
    let cfg = RunConfig {
        input: InputPaths {
            features: data.join("features.csv"),
            columns: vec![],
            cases: Some(data.join("cases.csv")),
            deaths: Some(data.join("deaths.csv")),
        },
        anchors: Some(AnchorDates::paper_2020()),
        standardize: true,
        reduction: Reduction::None,
        method,
        output_dir: dir.join("out"),
        seed: 1,
        interpret: InterpretSpec {
            n_trees: 10,
            ..Default::default()
        },
    };
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn read_table(path: &Path) -> FeatureTable {
    let mut r = csv::Reader::from_path(path).unwrap();
    let columns: Vec<String> = r.headers().unwrap().iter().skip(1).map(String::from).collect();
    let (mut ids, mut rows) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.unwrap();
        ids.push(rec[0].to_string());
        rows.push(rec.iter().skip(1).map(|v| v.parse().unwrap()).collect());
    }
    FeatureTable::new(ids, columns, rows).unwrap()
}

fn read_labels(path: &Path, ids: &[String]) -> LabelVector {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut seen = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.unwrap();
        seen.push(rec[0].to_string());
        labels.push(rec[1].parse().unwrap());
    }
    assert_eq!(seen, ids);
    LabelVector::new(labels).unwrap()
}

#[test]
fn bundle_scores_can_be_recomputed() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());
    for method in [
        MethodSpec::Kmeans { k: 3, restarts: 3 },
        MethodSpec::Dbscan {
            eps: 6.0,
            min_pts: 4,
            metric: Metric::Cityblock,
        },
    ] {
        let cfg = write_config(tmp.path(), &data, method);
        let (code, err) = clustkit(&["report", "--quiet", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        let out = tmp.path().join("out");
        let table = read_table(&out.join("model_input.csv"));
        let labels = read_labels(&out.join("labels.csv"), table.row_ids());
        let saved: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("scores.json")).unwrap()).unwrap();
        let metric: Metric = saved["metric"].as_str().unwrap().parse().unwrap();
        let d = pairwise_distances(&table, metric).unwrap();
        let fresh = score_labels(&table, &labels, &d).unwrap();
        let stored = saved["scores"].as_object().unwrap();
        assert!(!fresh.scores.is_empty());
        assert_eq!(stored.len(), fresh.scores.len());
        for (name, v) in &fresh.scores {
            let s = stored[name].as_f64().unwrap();
            assert!((s - v).abs() <= 1e-9 * (1.0 + v.abs()), "{name}: {s} vs {v}");
        }
        assert!(out.join("manifest.json").is_file());
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path());

    let cfg = write_config(tmp.path(), &data, MethodSpec::Kmeans { k: 3, restarts: 1 });
    let (code, _) = clustkit(&["cluster", "--config", cfg.to_str().unwrap(), "--k", "0"]);
    assert_eq!(code, 2);

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(clustkit(&["cluster", "--config", bad.to_str().unwrap()]).0, 2);

    let (code, _) = clustkit(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);

    let features = data.join("features.csv");
    let text = std::fs::read_to_string(&features).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[1] = "not-a-number".into();
    lines[1] = cells.join(",");
    std::fs::write(&features, lines.join("\n") + "\n").unwrap();
    let (code, err) = clustkit(&["ingest", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(!tmp.path().join("out").exists());
}
