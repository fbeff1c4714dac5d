use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_bessel-trace"))
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn conserve_reports_verdict_with_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verdict.json");
    let o = run(
        dir.path(),
        r#"{"command": "conserve", "measure": {"family": "constant", "c": 1.0}}"#,
        &["--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["schema_version"], "1.0.0");
    assert_eq!(v["command"], "conserve");
    assert_eq!(v["results"]["status"], "conservative");
    assert_eq!(v["results"]["rule"], "series_divergent");
    assert!(v["results"]["evidence"]["partial_series"].as_f64().unwrap() > 10.0);
    assert_eq!(v["resolved_config"]["params"]["horizon"], 1_000_000);
    for key in ["diagnostics", "warnings", "resolved_config", "results"] {
        assert!(v.get(key).is_some());
    }
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
}

#[test]
fn kernel_csv_has_header_and_unit_mass() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        r#"{"command": "kernel", "params": {"t_grid": [1.0], "x_grid": [1.0]}, "output": {"format": "csv"}}"#,
        &[],
    );
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("run.report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,mass,deviation"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row.len(), 4);
    assert!((row[2] - 1.0).abs() < 1e-8);
    assert!(lines.next().is_none());
}

#[test]
fn malformed_configs_exit_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.json");
    for (cfg, needle) in [
        ("{ this is not json", "invalid config"),
        (r#"{"command": "conserve", "measure": {"family": "triangular"}}"#, "invalid config"),
        (r#"{"command": "conserve", "measure": {"family": "explicit", "weights": [1.0, -2.0]}}"#, "not positive"),
        (
            r#"{"command": "conserve", "measure": {"family": "constant", "c": 1.0, "atom_at_zero": 1.0}}"#,
            "measures must not charge 0",
        ),
    ] {
        let o = run(dir.path(), cfg, &["--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{cfg}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{cfg}");
        assert!(!out.exists());
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_bessel-trace"))
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn validate_only_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), r#"{"command": "kernel"}"#, &["--validate-only"]);
    assert!(o.status.success());
    assert!(!dir.path().join("run.report.json").exists());
}

#[test]
fn reruns_are_byte_identical_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "simulate", "measure": {"family": "exponential", "beta": 1.0},
                  "params": {"trajectories": 500, "site_cap": 60, "horizon": 2.0, "times": [0.5, 1.0]}, "seed": 5}"#;
    let a = dir.path().join("a.json");
    assert!(run(dir.path(), cfg, &["--out", a.to_str().unwrap()]).status.success());
    let first = std::fs::read(&a).unwrap();
    assert!(run(dir.path(), cfg, &["--out", a.to_str().unwrap()]).status.success());
    assert!(first == std::fs::read(&a).unwrap(), "rerun changed the report");
    assert!(run(dir.path(), cfg, &["--out", a.to_str().unwrap(), "--seed", "6"]).status.success());
    let v = read_json(&a);
    assert_eq!(v["resolved_config"]["seed"], 6);
    assert_eq!(v["results"]["report"]["seed"], 6);
    assert!(first != std::fs::read(&a).unwrap());
    // Floats carry 17 significant digits.
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains("\"horizon\":2.0000000000000000e0"));
}

#[test]
fn spectrum_and_mixed_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    let o = run(
        dir.path(),
        r#"{"command": "spectrum", "measure": {"family": "constant", "c": 1.0},
            "params": {"n": 100, "eigen_count": 3, "witness_trials": 50, "embedding": {"p": 4.0, "tail_starts": [2, 4]}}}"#,
        &["--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["results"]["eigenpairs"].as_array().unwrap().len(), 3);
    assert!(v["diagnostics"]["truncation_study"].is_array());

    let out = dir.path().join("m.json");
    let o = run(
        dir.path(),
        r#"{"command": "mixed", "measure": {"family": "power", "p": 2.0, "ac_part": true}}"#,
        &["--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    assert_eq!(v["results"]["status"], "conservative");
    assert!((v["results"]["energy"].as_f64().unwrap() - (1.0 / 3.0 + 2.0)).abs() < 1e-10);
}

#[test]
fn report_all_collects_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("all.json");
    let o = run(
        dir.path(),
        r#"{"command": "report-all", "measure": {"family": "constant", "c": 1.0},
            "params": {"conserve": {"horizon": 10000}, "spectrum": {"n": 60, "witness_trials": 20},
                       "simulate": {"trajectories": 200, "site_cap": 200}, "mixed": {"horizon": 10000}}}"#,
        &["--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&out);
    for k in ["kernel", "trace", "conserve", "spectrum", "simulate", "mixed"] {
        assert!(v["results"].get(k).is_some(), "{k}");
    }
}
