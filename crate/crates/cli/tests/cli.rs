use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn balflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_balflow"))
        .current_dir(dir)
        .env_remove("BALFLOW_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn usage_errors_exit_2() {
    let d = TempDir::new().unwrap();
    for args in [
        vec!["simulate", "--model", "pure"],
        vec![
            "simulate",
            "--model",
            "nonsense",
            "--family",
            "asymmetric",
            "--n",
            "3",
        ],
        vec!["landscape", "--n", "4"],
        vec!["equilibria", "--n", "4", "--k", "1", "--signs", "1,1"],
        vec![
            "montecarlo",
            "--model",
            "pure",
            "--family",
            "kulakowski",
            "--n",
            "3",
        ],
        vec!["frobnicate"],
    ] {
        let out = balflow(d.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    assert!(files_in(d.path()).is_empty());
}

#[test]
fn malformed_input_exits_3() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("ragged.csv"), "0,1\n1\n").unwrap();
    std::fs::write(d.path().join("diag.csv"), "1,1\n1,0\n").unwrap();
    std::fs::write(d.path().join("nan.csv"), "0,nan\n1,0\n").unwrap();
    for f in ["ragged.csv", "missing.csv", "nan.csv"] {
        let out = balflow(d.path(), &["classify", "--input", f]);
        assert_eq!(out.status.code(), Some(3), "{f}");
    }
    let out = balflow(
        d.path(),
        &[
            "simulate", "--model", "pure", "--input", "diag.csv", "--name", "bad",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.path().join("bad.json").exists());
}

#[test]
fn numeric_failure_exits_4_without_partial_files() {
    let d = TempDir::new().unwrap();
    std::fs::write(d.path().join("zero.csv"), "0,0,0\n0,0,0\n0,0,0\n").unwrap();
    let out = balflow(
        d.path(),
        &[
            "simulate",
            "--model",
            "projected-pure",
            "--input",
            "zero.csv",
            "--name",
            "z",
            "--format",
            "csv",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(files_in(d.path()), vec!["zero.csv"]);
}

#[test]
fn ngon_classifies_with_triad_witness() {
    let d = TempDir::new().unwrap();
    let out = balflow(
        d.path(),
        &["equilibria", "--n", "3", "--k", "2", "--format", "csv"],
    );
    assert!(out.status.success());
    std::fs::write(d.path().join("ngon3.csv"), &out.stdout).unwrap();
    let v = stdout_json(&balflow(d.path(), &["classify", "--input", "ngon3.csv"]));
    assert_eq!(v["verdict"], "unbalanced");
    assert_eq!(v["witness"], serde_json::json!([1, 2, 3]));
    assert_eq!(v["eigen_signs"]["neg"], 1);
}

#[test]
fn equilibria_check_reports_expected_dissonance() {
    let d = TempDir::new().unwrap();
    let v = stdout_json(&balflow(
        d.path(),
        &["equilibria", "--n", "10", "--k", "3", "--check"],
    ));
    assert!(v["residual"].as_f64().unwrap() < 1e-9);
    assert!((v["dissonance"].as_f64().unwrap() + 0.27603).abs() < 1e-5);
    assert!(
        (v["dissonance"].as_f64().unwrap() - v["expected_dissonance"].as_f64().unwrap()).abs()
            < 1e-12
    );
    assert!(v["instability_certificate"].as_f64().unwrap() < 0.0);
    assert_eq!(v["spec"]["blocks"].as_array().unwrap().len(), 1);

    let b = stdout_json(&balflow(
        d.path(),
        &["equilibria", "--n", "5", "--balanced", "--check"],
    ));
    assert_eq!(b["count"], 16);
    for e in b["equilibria"].as_array().unwrap() {
        assert!(e["verdict"]["verdict"]
            .as_str()
            .unwrap()
            .starts_with("balanced"));
    }
}

#[test]
fn simulate_writes_csv_and_events() {
    let d = TempDir::new().unwrap();
    let v = stdout_json(&balflow(
        d.path(),
        &[
            "simulate",
            "--model",
            "projected-pure",
            "--family",
            "asymmetric",
            "--n",
            "4",
            "--seed",
            "3",
            "--format",
            "csv",
            "--name",
            "run",
        ],
    ));
    assert_eq!(v["terminal"]["event"], "converged_to_equilibrium");
    assert_eq!(files_in(d.path()), vec!["run.csv", "run.events.json"]);
    let csv = std::fs::read_to_string(d.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("t,z_1_1,"));
    let events: Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("run.events.json")).unwrap())
            .unwrap();
    assert!(events
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["event"] == "sign_stabilized"));
}

#[test]
fn out_dir_from_environment() {
    let d = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_balflow"))
        .current_dir(d.path())
        .env("BALFLOW_OUT_DIR", "nested/out")
        .args(["landscape", "--lon", "40", "--lat", "20", "--format", "csv"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.path().join("nested/out/landscape.csv").exists());
}

#[test]
fn montecarlo_is_deterministic_across_thread_counts() {
    let d = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        stdout_json(&balflow(
            d.path(),
            &[
                "montecarlo",
                "--model",
                "projected-pure",
                "--family",
                "symmetric",
                "--n",
                "4",
                "--trials",
                "24",
                "--seed",
                "11",
                "--threads",
                threads,
                "--name",
                name,
            ],
        ))
    };
    let a = run("1", "a");
    let b = run("4", "b");
    assert_eq!(a["p_hat"], b["p_hat"]);
    let ra = std::fs::read_to_string(d.path().join("a.json")).unwrap();
    let rb = std::fs::read_to_string(d.path().join("b.json")).unwrap();
    let strip = |s: &str| {
        let mut v: Value = serde_json::from_str(s).unwrap();
        v["parameters"]["threads"] = Value::Null;
        v["parameters"]["name"] = Value::Null;
        v
    };
    assert_eq!(strip(&ra), strip(&rb));
    assert!(!ra.contains("runtime"));
}

#[test]
fn help_exits_0() {
    let d = TempDir::new().unwrap();
    let out = balflow(d.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("montecarlo"));
}
