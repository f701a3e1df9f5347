//! End-to-end tests of the command-line interface: the build/audit
//! pipeline, report determinism, and the exit-code contract
//! (0 pass, 1 contract failure, 2 config error, 3 I/O error).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn reichlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reichlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("file exists")).expect("valid JSON")
}

#[test]
fn pipeline_is_deterministic_and_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"window": 4, "tol": 1e-5}"#).unwrap();
    let config = config.to_str().unwrap();
    let out_str = out.to_str().unwrap();

    let build = reichlab(&["partition-build", config, "--out", out_str]);
    assert_eq!(build.status.code(), Some(0), "stderr: {}", stderr(&build));
    for name in ["atoms.csv", "model.json", "report.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], "reichlab-report-v1");
    assert_eq!(report["atoms"].as_array().unwrap().len(), 16);
    assert_eq!(report["pass"], Value::Bool(true));

    let audit = reichlab(&["reich-audit", config, "--out", out_str]);
    assert_eq!(audit.status.code(), Some(0), "stderr: {}", stderr(&audit));
    for name in ["report.json", "constants.json", "condition2.csv", "condition3.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let first = fs::read(out.join("report.json")).unwrap();
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], "reichlab-report-v1");
    assert_eq!(report["window"]["k_min"], Value::from(-2));
    assert!(report["condition2_log_slope"].is_f64());

    // Same config, same seed: byte-identical report.
    let again = reichlab(&["reich-audit", config, "--out", out_str]);
    assert_eq!(again.status.code(), Some(0));
    let second = fs::read(out.join("report.json")).unwrap();
    assert_eq!(first, second, "reports differ between identical runs");

    // The condition tables parse as CSV with the documented headers.
    let c2 = fs::read_to_string(out.join("condition2.csv")).unwrap();
    assert!(c2.starts_with("n,k,l,alpha,omega_part,disk_part,cell_total,bound,verdict"));
    let c3 = fs::read_to_string(out.join("condition3.csv")).unwrap();
    assert!(c3.starts_with("n,k_threshold,max_abs_on_grid,empty_on_grid,measured_tail,bound,verdict"));
}

#[test]
fn kernel_check_default_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = reichlab(&["kernel-check", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr(&run));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema_version"], "reichlab-report-v1");
    assert_eq!(report["group"], "trivial");
    assert_eq!(report["pass"], Value::Bool(true));
    assert_eq!(report["certified"], Value::Bool(true));
    assert!(report["checks"].as_array().unwrap().len() >= 5);
    assert!(stdout(&run).contains("kernel-check on group trivial: pass"));
}

#[test]
fn tiny_budget_yields_non_certified_contract_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"tol": 1e-9, "budget": 200}"#).unwrap();
    let run = reichlab(&[
        "kernel-check",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1), "stderr: {}", stderr(&run));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["certified"], Value::Bool(false));
    assert_eq!(report["pass"], Value::Bool(false));
    let uncertified = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["certified"] == Value::Bool(false))
        .count();
    assert!(uncertified >= 1);
    assert!(stdout(&run).contains("not certified"));
}

#[test]
fn missing_atom_table_instructs_partition_build() {
    let dir = tempfile::tempdir().unwrap();
    let run = reichlab(&["reich-audit", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("run partition-build first"));
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, "{ not json").unwrap();
    let run = reichlab(&["kernel-check", config.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("invalid config"));
}

#[test]
fn out_of_range_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"tol": -3.0}"#).unwrap();
    let run = reichlab(&["kernel-check", config.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));

    fs::write(&config, r#"{"delta": 0.5}"#).unwrap();
    let run = reichlab(&["partition-build", config.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));

    fs::write(&config, r#"{"no_such_field": 1}"#).unwrap();
    let run = reichlab(&["kernel-check", config.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));

    let run = reichlab(&["no-such-command"]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn low_k_thresholds_are_rejected_for_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let build = reichlab(&["partition-build", "--window", "2", "--out", &out]);
    assert_eq!(build.status.code(), Some(0));
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"window": 2, "k_list": [10.0]}"#).unwrap();
    let run = reichlab(&["reich-audit", config.to_str().unwrap(), "--out", &out]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("K >= 100"));
}

#[test]
fn unwritable_output_location_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "plain file").unwrap();
    let out = blocker.join("sub");
    let run = reichlab(&["partition-build", "--window", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3), "stderr: {}", stderr(&run));
}

#[test]
fn config_and_built_atoms_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let build = reichlab(&["partition-build", "--window", "2", "--out", &out]);
    assert_eq!(build.status.code(), Some(0));
    let run = reichlab(&["reich-audit", "--seed", "99", "--out", &out]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("re-run partition-build"));
}

#[test]
fn degenerate_single_cell_window_builds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run = reichlab(&["partition-build", "--window", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr(&run));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["atoms"].as_array().unwrap().len(), 1);
    assert_eq!(report["model"]["cells"], Value::from(1));
}

#[test]
fn single_n_produces_report_with_threshold_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap().to_owned();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"window": 4, "tol": 1e-5, "n_list": [1]}"#).unwrap();
    let config = config.to_str().unwrap();
    let build = reichlab(&["partition-build", config, "--out", &out]);
    assert_eq!(build.status.code(), Some(0));
    let run = reichlab(&["reich-audit", config, "--out", &out]);
    assert_eq!(run.status.code(), Some(0), "stderr: {}", stderr(&run));
    let report = read_json(&Path::new(&out).join("report.json"));
    let warnings = report["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| {
            let w = w.as_str().unwrap();
            w.contains("below the fitted threshold")
        }),
        "warnings: {warnings:?}"
    );
    assert!(report["condition2_log_slope"].is_null());
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(reichlab(&["--help"]).status.code(), Some(0));
    assert_eq!(reichlab(&["--version"]).status.code(), Some(0));
    assert_eq!(reichlab(&["kernel-check", "--help"]).status.code(), Some(0));
}
