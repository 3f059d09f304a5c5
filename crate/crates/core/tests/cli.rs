use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robust-tree"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

/// Two noisy blobs in two numerical features.
fn toy_csv(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,label\n");
    for i in 0..60 {
        let t = i as f64 / 60.0;
        let label = (i % 3 != 0) as u8 ^ (t > 0.5) as u8;
        text.push_str(&format!("{t},{},{label}\n", 1.0 - t * t));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_model_and_summary() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let model = dir.path().join("m.json");
    let out = run(&["fit", "--data", s(&data), "--epsilon", "0.05", "--max-depth", "3", "--out", s(&model)]);
    let doc = stdout_json(&out);
    assert!(doc["summary"]["depth"].as_u64().unwrap() <= 3);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(saved["format"], "robust-tree");
    assert_eq!(saved["version"], 1);
    assert!(saved["scaler"].is_object());
}

#[test]
fn zero_rho_matches_null_threat_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let a = dir.path().join("rho0.json");
    let b = dir.path().join("null.json");
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0.1", "--rho", "0", "--out", s(&a)]).status.success());
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0", "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bad_threat_token_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let model = dir.path().join("m.json");
    let out = run(&["fit", "--data", s(&data), "--threat", "0.1,banana", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("feature 1"), "{err}");
    assert!(!model.exists());

    let out = run(&["fit", "--data", s(&data), "--threat", "0.1", "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_not_a_validation_error() {
    let out = run(&["fit", "--data", "/nonexistent/x.csv", "--epsilon", "0.1", "--out", "/tmp/never.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_is_monotone_in_epsilon() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let model = dir.path().join("m.json");
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0.05", "--out", s(&model)]).status.success());
    let mut previous = f64::INFINITY;
    for eps in ["0", "0.02", "0.05", "0.1", "0.3"] {
        let doc = stdout_json(&run(&["eval", "--model", s(&model), "--data", s(&data), "--epsilon", eps]));
        let acc = doc["accuracy"].as_f64().unwrap();
        let adv = doc["adversarial_accuracy"].as_f64().unwrap();
        if eps == "0" {
            assert_eq!(acc, adv);
        }
        assert!(adv <= acc && adv <= previous, "eps {eps}: {adv} after {previous}");
        previous = adv;
    }
}

#[test]
fn eval_writes_per_sample_report() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let model = dir.path().join("m.json");
    let report = dir.path().join("attack.json");
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0.05", "--out", s(&model)]).status.success());
    let out = run(&["eval", "--model", s(&model), "--data", s(&data), "--epsilon", "0.05", "--report", s(&report)]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["samples"].as_array().unwrap().len(), 60);
}

#[test]
fn cv_reports_both_models() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let doc = stdout_json(&run(&["cv", "--data", s(&data), "--epsilon", "0.05", "--folds", "3"]));
    let text = doc.to_string();
    assert!(text.contains("robust") && text.contains("natural"), "{text}");

    let out = run(&["cv", "--data", s(&data), "--epsilon", "0.05", "--folds", "3", "--table"]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).is_empty());
}

#[test]
fn grid_emits_resolution_squared_rows() {
    let dir = TempDir::new().unwrap();
    let data = toy_csv(dir.path());
    let model = dir.path().join("m.json");
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0.05", "--out", s(&model)]).status.success());
    let out = run(&["grid", "--model", s(&model), "--grid-resolution", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,label"));
    assert_eq!(lines.count(), 49);
}

#[test]
fn grid_needs_feature_indices_beyond_two_features() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("three.csv");
    let mut text = String::from("a,b,c,label\n");
    for i in 0..20 {
        text.push_str(&format!("{i},{},{},{}\n", i % 4, i % 7, (i > 9) as u8));
    }
    std::fs::write(&data, text).unwrap();
    let model = dir.path().join("m.json");
    assert!(run(&["fit", "--data", s(&data), "--epsilon", "0.05", "--out", s(&model)]).status.success());
    let out = run(&["grid", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--x-feature"));
    let out = run(&["grid", "--model", s(&model), "--x-feature", "0", "--y-feature", "2", "--grid-resolution", "3"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 10);
}
