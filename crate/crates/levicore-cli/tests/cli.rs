use serde_json::Value;
use std::process::{Command, Output};

fn levicore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levicore")).args(args).output().expect("run levicore")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn examples_list_has_schemas() {
    let out = levicore(&["examples", "list"]);
    assert!(out.status.success());
    let v = json(&out);
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ball", "ellipsoid", "quartic", "saddle", "worm"]);
    let worm = &v[4]["params"];
    assert!(worm.as_array().unwrap().iter().any(|p| p["name"] == "beta"));
}

#[test]
fn oracle_writes_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = levicore(&["oracle", "--m", "64", "--csv", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["oracle"]["value"].as_f64().unwrap() - 0.636108).abs() < 1e-6);
    let table = std::fs::read_to_string(dir.path().join("oracle_convergence.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "m,value,lower,upper");
    assert_eq!(lines.len(), 4);
}

#[test]
fn unknown_domain_is_an_error() {
    let out = levicore(&["core", "--domain", "torus"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "domain");
}

#[test]
fn invalid_delta_grid_is_a_config_error() {
    let out = levicore(&["df-scan", "--domain", "ball", "--delta-grid", "0.5,0.2"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "config");
}

#[test]
fn bad_flag_value_is_a_usage_error() {
    let out = levicore(&["df-scan", "--domain", "ball", "--delta-grid", "0.2,x"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "usage");
}

#[test]
fn saddle_exits_with_violation_status() {
    let out = levicore(&["analyze", "--domain", "saddle", "--samples", "400", "--normalized"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "pseudoconvexity-violation");
    assert!(!v["pseudoconvexity"]["violations"].as_array().unwrap().is_empty());
    assert!(v["df"].is_null());
}

#[test]
fn core_iteration_cap_exits_with_not_stabilized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "domain = \"quartic\"\n[sample]\ncount = 600\n[tolerances]\nmaxCoreIter = 1\n").unwrap();
    let out = levicore(&["core", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["core"]["stabilized"], false);
}

#[test]
fn flags_override_config_and_report_goes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "domain = \"worm\"\n[sample]\ncount = 300\n").unwrap();
    let report = dir.path().join("core.json");
    let out = levicore(&[
        "core",
        "--config",
        cfg.to_str().unwrap(),
        "--domain",
        "quartic",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["config"]["domain"], "quartic");
    assert_eq!(v["config"]["sample"]["count"], 300);
    assert!(v["timings"].is_array());
}

#[test]
fn ball_df_scan_writes_defect_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = levicore(&["df-scan", "--domain", "ball", "--samples", "200", "--csv", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["df"]["routeA"]["delta"].as_f64().unwrap() >= 0.999);
    assert_eq!(v["df"]["routeB"]["df"], 1.0);
    let curve = std::fs::read_to_string(dir.path().join("defect_curve.csv")).unwrap();
    assert!(curve.starts_with("delta,defect\n"));
    assert_eq!(curve.lines().count(), 21);
}
