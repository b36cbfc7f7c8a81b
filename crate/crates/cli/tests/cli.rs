use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lagquant"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn phase_config() -> Value {
    json!({
        "schema": 1,
        "experiment": "phase-bound",
        "scheme": {"kind": "torus", "field": {"kind": "sin", "amp": [[1.0]], "freq": [1]}},
        "k_list": [8, 16, 32],
        "samples": 40,
        "seed": 1,
    })
}

#[test]
fn successful_run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("norm.csv");
    let cfg = configs().join("norm-convergence.json");
    let out = run(&[
        "norm-convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--k-list",
        "8,16,32",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["status"], "ok");
    assert_eq!(summary["experiment"], "norm-convergence");
    assert_eq!(summary["rows"], 3);
    assert!(summary["slope"].is_f64());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,value,normalized,slope_so_far");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("8,"));
}

#[test]
fn same_seed_gives_identical_bytes_and_seed_override_changes_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "phase.json", &phase_config());
    let csv = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut args = vec!["phase-bound", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let a = csv("a.csv", &["--jobs", "1"]);
    let b = csv("b.csv", &["--jobs", "4"]);
    assert_eq!(a, b);
    assert_ne!(a, csv("c.csv", &["--seed", "2"]));
}

#[test]
fn mismatched_experiment_fails_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "phase.json", &phase_config());
    let out = run(&["bt-compare", "--config", cfg.to_str().unwrap(), "--out", "unused.csv"]);
    assert!(!out.status.success());
    let rec = stderr_json(&out);
    assert_eq!(rec["status"], "failed");
    assert_eq!(rec["experiment"], "bt-compare");
    assert_eq!(rec["kind"], "config");
    assert!(out.stdout.is_empty());
}

#[test]
fn failed_hard_check_exits_nonzero_and_names_the_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = phase_config();
    // a zero tolerance cannot be met by a finite-step solver
    v["tolerances"] = json!({"phase_oracle": 0.0});
    let cfg = write_config(dir.path(), "strict.json", &v);
    let out_path = dir.path().join("strict.csv");
    let out = run(&["phase-bound", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert!(!out.status.success());
    let rec = stderr_json(&out);
    assert_eq!(rec["kind"], "check_failed");
    assert_eq!(rec["check"], "phase-oracle");
    assert!(!out_path.exists());
}

#[test]
fn missing_config_and_output_are_reported() {
    let out = run(&["norm-convergence", "--config", "/nonexistent/cfg.json", "--out", "x.csv"]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["kind"], "config");
    // no --out and no `output` in the config
    let cfg = configs().join("norm-convergence.json");
    let out = run(&["norm-convergence", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(stderr_json(&out)["kind"], "config");
}

#[test]
fn invalid_arguments_are_rejected() {
    let cfg = configs().join("norm-convergence.json");
    let cfg = cfg.to_str().unwrap();
    assert!(!run(&["norm-convergence", "--config", cfg, "--out", "x.csv", "--jobs", "0"]).status.success());
    assert!(!run(&["no-such-experiment", "--config", cfg, "--out", "x.csv"]).status.success());
    let short = run(&["norm-convergence", "--config", cfg, "--out", "x.csv", "--k-list", "8,16"]);
    assert!(!short.status.success());
    assert_eq!(stderr_json(&short)["kind"], "config");
}

#[test]
fn omega_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("bt-compare.json");
    let csv = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut args = vec!["bt-compare", "--config", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()];
        args.extend_from_slice(&["--k-list", "8,16,32"]);
        args.extend_from_slice(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(path).unwrap()
    };
    let flat = csv("flat.csv", &[]);
    let wide = csv("wide.csv", &["--omega", r#"{"p":[[0.0]],"q":[[2.0]]}"#]);
    assert_ne!(flat, wide);
}
