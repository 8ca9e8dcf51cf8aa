use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critwalk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn empty_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    for text in ["", "{}", "  \n"] {
        let cfg = tmp.path().join("cfg.json");
        fs::write(&cfg, text).unwrap();
        let out = critwalk(&["run", "--config", path(&cfg), "--out", path(tmp.path())]);
        assert_eq!(out.status.code(), Some(2), "{text:?}");
    }
}

#[test]
fn unknown_kind_exits_2_and_lists_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "walkabout", "d": 3}"#).unwrap();
    let out = critwalk(&["run", "--config", path(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for kind in critwalk_cli::KINDS {
        assert!(err.contains(kind), "{err}");
    }
}

#[test]
fn malformed_and_mismatched_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "tail", "d": 3,"#).unwrap();
    assert_eq!(critwalk(&["run", "--config", path(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, r#"{"kind": "tail", "d": 3, "T": 1, "b_T": 1}"#).unwrap();
    assert_eq!(critwalk(&["green", "--config", path(&cfg)]).status.code(), Some(2));
    // Missing required parameter.
    assert_eq!(critwalk(&["tail", "--d", "3"]).status.code(), Some(2));
    // Too few replicas is a parameter error.
    let out = critwalk(&["tail", "--d", "3", "--T", "1", "--b_T", "1", "--n", "10", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn one_site_variational_reports_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let out = critwalk(&["rho", "--d", "3", "--R", "1", "--lambda", "2", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    assert!((s["result"]["rho1"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((s["result"]["rho2"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(s["status"], "ok");
}

#[test]
fn variational_non_convergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "variational", "d": 3, "R": 4, "lambda": 1, "tol": 1e-30}"#).unwrap();
    let out = critwalk(&["run", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(summary(tmp.path())["status"], "numeric_failure");
}

#[test]
fn green_preset_rows_decrease() {
    let tmp = tempfile::tempdir().unwrap();
    let out = critwalk(&["green", "--d", "3", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("replicas.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("replica_index,value"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.len() >= 5);
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    let rows = summary(tmp.path())["result"]["rows"].as_array().unwrap().clone();
    let lambdas: Vec<f64> = rows.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[1] < w[0]));
}

fn strip_wall_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identical_config_gives_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"kind": "tail", "d": 3, "T": 2, "b_T": 1.2, "n": 2000, "seed": 42}"#).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(critwalk(&["run", "--config", path(&cfg), "--out", path(dir)]).status.code(), Some(0));
    }
    let read = |d: &Path, f: &str| fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(strip_wall_time(&read(&a, "summary.json")), strip_wall_time(&read(&b, "summary.json")));
    assert_eq!(read(&a, "replicas.csv"), read(&b, "replicas.csv"));
    let csv = read(&a, "replicas.csv");
    assert_eq!(csv.lines().count(), 2001);
}

#[test]
fn inline_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"d": 3, "T": 2, "b_T": 1.2, "n": 1000, "seed": 1}"#).unwrap();
    let out = critwalk(&["tail", "--config", path(&cfg), "--seed", "9", "--T", "3", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(tmp.path());
    assert_eq!(s["seed"], 9);
    assert_eq!(s["params"]["T"].as_f64(), Some(3.0));
    assert_eq!(s["params"]["n"], 1000);
}

#[test]
fn small_scale_preset_warns() {
    let tmp = tempfile::tempdir().unwrap();
    // R = round(1000^{1/3}) = 10, b_T R²/T = 0.5.
    let out = critwalk(&["tail", "--d", "3", "--T", "1000", "--b_T", "5", "--n", "1000", "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(tmp.path());
    assert!((s["params"]["scale"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(!s["warnings"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn every_subcommand_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["confine", "--d", "3", "--T", "1", "--b_T", "0.8", "--box_L", "1", "--n", "1000"],
        &["expmoment", "--d", "3", "--T", "1", "--theta", "0.5", "--n", "1000"],
        &["iso", "--d", "3", "--R", "2", "--lambda", "1", "--s", "-1", "--a", "0.1", "--n", "1000"],
        &["sobolev", "--d", "3", "--L", "2"],
        &["rho", "--d", "3", "--R", "auto", "--T", "64", "--b_T", "8"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        let mut full = args.to_vec();
        full.extend(["--out", path(&dir)]);
        let out = critwalk(&full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(summary(&dir)["status"], "ok");
        assert!(dir.join("replicas.csv").exists());
    }
}
