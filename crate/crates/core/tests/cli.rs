use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gammalab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gammalab")).args(args).current_dir(dir).output().expect("binary runs")
}

fn suite(dir: &TempDir, config: &str) -> Output {
    std::fs::write(dir.path().join("config.json"), config).unwrap();
    gammalab(&["--json", "out.json", "--csv-dir", "csv", "suite", "run", "--config", "config.json"], dir.path())
}

#[test]
fn passing_suite_exits_zero_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let out = suite(&dir, r#"{"seed": 3, "checks": [{"id": "constants", "models": ["heisenberg"]}]}"#);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out.json")).unwrap()).unwrap();
    let results = report.as_array().expect("report is an array");
    assert!(!results.is_empty());
    for r in results {
        assert_eq!(r["verdict"], "pass");
        for key in ["check_id", "anchor", "model", "margin", "tolerance", "stat_error", "inputs_digest"] {
            assert!(r.get(key).is_some(), "missing {key}");
        }
    }

    let mut summary = csv::Reader::from_path(dir.path().join("csv/summary.csv")).unwrap();
    let header: Vec<_> = summary.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["check_id", "anchor", "model", "verdict", "margin", "tolerance", "stat_error", "inputs_digest"]);
    assert_eq!(summary.records().count(), results.len());
}

#[test]
fn failing_check_exits_one() {
    let dir = TempDir::new().unwrap();
    let out = suite(&dir, r#"{"checks": [{"id": "ricci_comparison", "models": ["heisenberg"]}]}"#);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().any(|r| r["verdict"] == "fail"));
}

#[test]
fn bad_config_exits_two() {
    let dir = TempDir::new().unwrap();
    for config in [
        r#"{"checks": [{"id": "no_such_check"}]}"#,
        r#"{"checks": [{"id": "constants", "modles": ["heisenberg"]}]}"#,
        r#"{"checks": [{"id": "constants", "models": ["no_such_model"]}]}"#,
        "not json",
    ] {
        let out = suite(&dir, config);
        assert_eq!(out.status.code(), Some(2), "{config}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn empty_check_list_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = suite(&dir, r#"{"checks": []}"#);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out.json")).unwrap()).unwrap();
    assert_eq!(report.as_array().map(Vec::len), Some(0));
}

#[test]
fn invalid_argument_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = gammalab(&["distance", "heisenberg", "--x", "0,0", "--y", "0,0,1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = gammalab(&["constants", "no_such_model"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn distance_command_reports_the_circle_value() {
    let dir = TempDir::new().unwrap();
    let out = gammalab(&["--json", "d.json", "distance", "heisenberg", "--x", "0,0,0", "--y", "0,0,1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let d: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("d.json")).unwrap()).unwrap();
    let value = d["value"].as_f64().unwrap();
    assert!((value - (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-8);
}
