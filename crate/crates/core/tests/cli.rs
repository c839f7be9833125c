// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::{Command, Output};

fn qlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlab")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn list_names_every_scenario() {
    let out = qlab(&["list", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["polarization", "zeno", "histories_audit", "empirical_scan", "ndm_ensemble", "classical_oracle"]
    );
    let text = String::from_utf8(qlab(&["list"]).stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn bundled_configs_validate_and_pass() {
    for name in [
        "polarization.json",
        "zeno.json",
        "histories_audit.json",
        "empirical_scan.json",
        "ndm_ensemble.json",
        "classical_oracle.json",
    ] {
        let v = qlab(&["validate", "--config", &config(name)]);
        assert!(v.status.success(), "{name}");
        assert_eq!(String::from_utf8_lossy(&v.stdout).trim(), "ok");
        let r = qlab(&["run", "--config", &config(name)]);
        assert_eq!(r.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&r.stderr));
    }
}

#[test]
fn validate_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(&dir, "a.json", r#"{"scenario":"zeno","parameters":{"n":3,"extra":1}}"#);
    let out = qlab(&["validate", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("extra"));

    let range = write(&dir, "b.json", r#"{"scenario":"zeno","parameters":{"n":0}}"#);
    let out = qlab(&["validate", "--config", &range]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains('n'));

    let missing = write(&dir, "c.json", r#"{"scenario":"ndm_ensemble","parameters":{"phi":1.0}}"#);
    let out = qlab(&["validate", "--config", &missing]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("prior"));

    let kind = write(&dir, "d.json", r#"{"scenario":"nope","parameters":{}}"#);
    assert_eq!(qlab(&["validate", "--config", &kind]).status.code(), Some(1));
    assert_eq!(qlab(&["run", "--config", &kind]).status.code(), Some(1));
}

#[test]
fn failing_checks_exit_with_two() {
    // two probes cannot drive the posterior to within 1e-9 of certainty
    let out = qlab(&[
        "ndm-ensemble",
        "--params",
        r#"{"phi":1.0,"prior":[0.5,0.5],"trajectories":50,"k_max":2,"eta":1e-9}"#,
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn missing_config_file_is_an_error() {
    let out = qlab(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn reports_are_byte_identical_across_threads() {
    for name in ["ndm_ensemble.json", "classical_oracle.json", "histories_audit.json", "empirical_scan.json"] {
        let path = config(name);
        let one = qlab(&["--threads", "1", "run", "--config", &path]).stdout;
        let four = qlab(&["--threads", "4", "run", "--config", &path]).stdout;
        let again = qlab(&["run", "--config", &path]).stdout;
        assert!(!one.is_empty());
        assert_eq!(one, four, "{name}");
        assert_eq!(one, again, "{name}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let path = config("ndm_ensemble.json");
    let out = qlab(&["--seed", "9", "run", "--config", &path]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"]["value"], 9);
    assert_eq!(v["seed"]["source"], "cli");
    let out = qlab(&["run", "--config", &path]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"]["source"], "config");
}

#[test]
fn csv_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.csv");
    let out = qlab(&["--format", "csv", "--out", target.to_str().unwrap(), "polarization"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,value_real,value_imag,tolerance,status"));
    assert!(text.lines().any(|l| l.starts_with("sum_rule_defect")));
}

#[test]
fn timing_is_opt_in() {
    let v: serde_json::Value = serde_json::from_slice(&qlab(&["zeno"]).stdout).unwrap();
    assert!(v["wall_clock_seconds"].is_null());
    let v: serde_json::Value = serde_json::from_slice(&qlab(&["--timing", "zeno"]).stdout).unwrap();
    assert!(v["wall_clock_seconds"].is_number());
}
