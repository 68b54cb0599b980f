use std::fs;
use std::process::Command;

use bregmantron::train::Variant;
use bregmantron::TrainConfig;
use bregmantron_harness::curves::export_curves;
use bregmantron_harness::output::{read_json, TRACE_HEADER};
use bregmantron_harness::{run_experiment, DatasetSpec, ExperimentSpec, Method, Summary, TrainedModel};

fn spec(iterations: usize, out: Option<&std::path::Path>) -> ExperimentSpec {
    let config = TrainConfig {
        iterations,
        ..TrainConfig::default()
    };
    let mut spec = ExperimentSpec::new(DatasetSpec::Synth, Method::Bregmantron, config);
    spec.output = out.map(|p| p.to_path_buf());
    spec
}

#[test]
fn zero_iterations_write_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&spec(0, Some(dir.path()))).unwrap();
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.trim_end(), TRACE_HEADER.join(","));
    let summary: Summary = read_json(&dir.path().join("summary.json")).unwrap();
    assert_eq!(summary.final_loss, None);
}

#[test]
fn rerun_gives_identical_summary() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&spec(4, Some(a.path()))).unwrap();
    run_experiment(&spec(4, Some(b.path()))).unwrap();
    for file in ["summary.json", "trace.csv", "link.json", "model.json"] {
        let read = |d: &tempfile::TempDir| fs::read(d.path().join(file)).unwrap();
        assert_eq!(read(&a), read(&b), "{file}");
    }
    let trace = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn saved_model_scores_like_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&spec(3, Some(dir.path()))).unwrap();
    let model: TrainedModel = read_json(&dir.path().join("model.json")).unwrap();
    let split = DatasetSpec::Synth.load(std::path::Path::new("."), 0, true).unwrap();
    assert_eq!(model.auc(&split.test).unwrap(), outcome.summary.auc_test);
    if let TrainedModel::Link { link, .. } = model {
        let rows = export_curves(&link, 50).unwrap();
        assert_eq!(rows.len(), 50);
    }
}

#[test]
fn baselines_run_through_the_same_path() {
    for method in [Method::logistic(), Method::Glmtron, Method::Slisotron] {
        let mut spec = spec(5, None);
        spec.method = method;
        let outcome = run_experiment(&spec).unwrap();
        assert!(outcome.summary.auc_test > 0.9, "{}", outcome.summary.method);
        assert!(outcome.records.is_empty());
    }
    let mut labelled = spec(2, None);
    labelled.config.variant = Variant::Label;
    assert_eq!(run_experiment(&labelled).unwrap().summary.method, "bregmantron_label");
}

#[test]
fn cli_reports_errors_as_json() {
    let output = Command::new(env!("CARGO_BIN_EXE_bregmantron"))
        .args(["train", "--dataset", "cifar:0/1"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let error: serde_json::Value = serde_json::from_slice(&output.stderr).unwrap();
    assert_eq!(error["kind"], "selector");
    assert!(error["message"].as_str().unwrap().contains("cifar"));
}

#[test]
fn cli_trains_and_exports_curves() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bregmantron");
    let out = dir.path().join("run");
    let status = Command::new(bin)
        .args(["train", "--dataset", "synth", "--iters", "3", "--nt", "0.02", "--Nt", "0.5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let saved: ExperimentSpec = read_json(&out.join("spec.json")).unwrap();
    assert_eq!(saved.config.iterations, 3);
    let curves = dir.path().join("curves.csv");
    let status = Command::new(bin)
        .args(["export-curves", "--grid", "11", "--link"])
        .arg(out.join("link.json"))
        .arg("--out")
        .arg(&curves)
        .output()
        .unwrap();
    assert!(status.status.success());
    let text = fs::read_to_string(curves).unwrap();
    assert_eq!(text.lines().next(), Some("v,u,loss_pos,loss_neg"));
    assert_eq!(text.lines().count(), 12);
}
