//! Exit codes and file contracts of the `ndt` binary.

use std::path::Path;
use std::process::{Command, Output};

use ndt::netmodel::NetworkGraph;

fn ndt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndt")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ndt(args);
    assert!(out.status.success(), "ndt {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn topology(dir: &Path, extra: &[&str]) -> NetworkGraph {
    let mut args = vec!["topology", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
    NetworkGraph::from_json(&std::fs::read_to_string(dir.join("topology.json")).unwrap()).unwrap()
}

#[test]
fn nsfnet_topology_has_fourteen_nodes_and_42_links() {
    let dir = tempfile::tempdir().unwrap();
    let g = topology(dir.path(), &["--family", "nsfnet"]);
    assert_eq!((g.node_count(), g.link_count()), (14, 42));
    assert!(dir.path().join("run_config.toml").exists());
}

#[test]
fn more_power_means_more_grid_links() {
    let dir = tempfile::tempdir().unwrap();
    let low = topology(&dir.path().join("a"), &["--family", "grid", "--ptx", "12"]);
    let high = topology(&dir.path().join("b"), &["--family", "grid", "--ptx", "20"]);
    assert!(high.link_count() > low.link_count());
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["topology"],
        vec!["train"],
        vec!["eval", "--dataset", "x.jsonl"],
        vec!["bench", "--reps", "2"],
        vec!["topology", "--family", "ring"],
    ] {
        let out = ndt(&args);
        assert_eq!(out.status.code(), Some(2), "ndt {args:?}");
    }
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("nope.jsonl"));
    let out = ndt(&["train", "--dataset", &missing, "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn empty_dataset_is_an_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["dataset", "--family", "grid", "--n", "0", "--out", &s(dir.path())]);
    assert_eq!(std::fs::read(dir.path().join("dataset.jsonl")).unwrap().len(), 0);
}

#[test]
fn dataset_metadata_records_the_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["dataset", "--family", "grid", "--rate", "100", "--n", "2", "--out", &s(dir.path())]);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("dataset.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["data_rate_kbps"], 100.0);
}

#[test]
fn train_then_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data_dir, model_dir, eval_dir) = (dir.path().join("data"), dir.path().join("model"), dir.path().join("eval"));
    ok(&["dataset", "--family", "grid", "--n", "24", "--seed", "2", "--out", &s(&data_dir)]);
    let data = s(&data_dir.join("dataset.jsonl"));
    ok(&["train", "--dataset", &data, "--epochs", "3", "--patience", "3", "--out", &s(&model_dir)]);

    let curves = std::fs::read_to_string(model_dir.join("curves.csv")).unwrap();
    let rows = curves.lines().count() - 1;
    assert!(rows > 0 && rows <= 3 * 3, "{rows} curve rows");

    let summary = ok(&[
        "eval",
        "--dataset",
        &data,
        "--ground-truth",
        "--sim-avg",
        "1,2,3",
        "--model",
        &format!("mine={}", model_dir.display()),
        "--kpi",
        "delay",
        "--out",
        &s(&eval_dir),
    ]);
    assert!(summary.contains("delay"), "{summary}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["ground-truth", "sim-avg-1", "sim-avg-2", "sim-avg-3", "mine"]);
    assert_eq!(rows[0]["nmae_mean"], 0.0);
    let csv = std::fs::read_to_string(eval_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + methods.len());
    assert!(eval_dir.join("box.csv").exists());
}

#[test]
fn generic_gnn_refuses_variable_path_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    ok(&["dataset", "--family", "grid", "--n", "6", "--paths", "4", "--out", &s(&data_dir)]);
    let data = s(&data_dir.join("dataset.jsonl"));
    let out = ndt(&["train", "--dataset", &data, "--variant", "generic_gnn", "--epochs", "1", "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("path"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_reports_both_times_and_the_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let printed = ok(&["bench", "--reps", "3", "--duration", "5", "--out", &s(dir.path())]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    for key in ["forward_median_s", "sim_median_s", "ratio"] {
        assert!(report[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert!(printed.contains("ratio"), "{printed}");
}
