use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracdeg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracdeg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("run-manifest.json")).unwrap()).unwrap()
}

const BURGERS: &str = r#"{
  "schema": "problem/v1",
  "alpha": 1.0,
  "flux": {"kind": "burgers", "scale": 1.0},
  "diffusion": {"kind": "linear", "slope": 0.2},
  "initial": {"kind": "steps", "edges": [-1.0, 0.0, 1.0], "values": [1.0, -0.5]},
  "comparison": {"kind": "box", "gamma": 0.8},
  "cells": 64,
  "half_width": 3.0,
  "horizon": 0.2,
  "entropy": {"ks": [-0.25, 0.5], "tests": [{"center": 0.0, "half_width": 1.0}], "tolerance": 0.05}
}"#;

#[test]
fn solve_writes_trajectory_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "burgers.json", BURGERS);
    let out = dir.path().join("out");
    let o = fracdeg(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("time,x,u"));
    assert!(out.join("apriori.json").exists());
    let m = manifest(&out);
    assert_eq!(m["verdict"], "PASS");
    assert_eq!(m["command"], "solve");
    let digest = fracdeg::cli::config_digest(Path::new(&cfg)).unwrap();
    assert_eq!(m["config_sha256"], digest.as_str());
    assert_eq!(digest.len(), 64);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_and_entropy_checks_pass_on_burgers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "burgers.json", BURGERS);
    for cmd in ["verify-invariants", "entropy-check"] {
        let out = dir.path().join(cmd);
        let o = fracdeg(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(manifest(&out)["verdict"], "PASS");
    }
}

#[test]
fn failing_ratio_floor_exits_one_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "kuz.json",
        r#"{"schema": "sweep-config/v1", "kind": "kuznetsov", "engine": "spectral",
            "ladder": {"kind": "geometric", "start": 0.1, "ratio": 0.5, "points": 4},
            "fixed": {"alpha": 1.5},
            "thresholds": {"floor": 1e6, "ceiling": 1e9}}"#,
    );
    let out = dir.path().join("out");
    let o = fracdeg(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("FAIL ratio-window"), "{err}");
    assert_eq!(manifest(&out)["verdict"], "FAIL");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn usage_and_config_errors_exit_two_without_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fracdeg(&["solve", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let bad = write(dir.path(), "bad.json", &BURGERS.replace("problem/v1", "problem/v0"));
    let o = fracdeg(&["solve", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("problem/v0"));
    let unknown = write(dir.path(), "unknown.json", &BURGERS.replace("\"cells\"", "\"cels\""));
    assert_eq!(
        fracdeg(&["solve", "--config", &unknown, "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    // the oracle needs the linear box example
    let cfg = write(dir.path(), "burgers.json", BURGERS);
    assert_eq!(
        fracdeg(&["oracle-compare", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert!(!out.join("run-manifest.json").exists());
}

#[test]
fn oracle_compare_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "linear.json",
        r#"{"schema": "problem/v1", "alpha": 1.5, "diffusion": {"kind": "linear", "slope": 1.0},
            "initial": {"kind": "box", "gamma": 1.0}, "cells": 128, "half_width": 4.0, "horizon": 0.25,
            "oracle": {"tolerance": 0.05}}"#,
    );
    let out = dir.path().join("oracle");
    let o = fracdeg(&["-v", "oracle-compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let art: Value = serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(art["errors"].as_array().unwrap().len(), 17);
    assert!(art["max_error"].as_f64().unwrap() < 0.05);

    let sweep = write(
        dir.path(),
        "kuz.json",
        r#"{"schema": "sweep-config/v1", "kind": "kuznetsov", "engine": "spectral",
            "ladder": {"kind": "geometric", "start": 0.1, "ratio": 0.5, "points": 4},
            "fixed": {"alpha": 0.5}}"#,
    );
    let s_out = dir.path().join("sweep");
    assert_eq!(
        fracdeg(&["sweep", "--config", &sweep, "--out", s_out.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let r_out = dir.path().join("report");
    let input = s_out.join("sweep.json");
    let o = fracdeg(&["report", "--out", r_out.to_str().unwrap(), input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(r_out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(fs::read_to_string(r_out.join("report.md")).unwrap().contains("kuznetsov"));
}
