//! End-to-end runs of the compiled binary: artifacts, determinism, exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sojourn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sojourn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_is_deterministic_and_on_support() {
    let dir = tempdir().unwrap();
    let args = [
        "simulate", "--family", "linear", "--a", "-0.1", "-T", "10", "--count", "200", "--seed",
        "11",
    ];
    let one = sojourn(&args, dir.path());
    let two = sojourn(&args, dir.path());
    assert!(one.status.success());
    assert_eq!(one.stdout, two.stdout);

    for line in stdout_of(&one).lines() {
        let v: u32 = line.parse().expect("integer output");
        assert!((1..=10).contains(&v));
    }
}

#[test]
fn simulate_then_fit_recovers_the_coefficient() {
    let dir = tempdir().unwrap();
    let sim = sojourn(
        &[
            "simulate", "--family", "linear", "--a", "-0.1", "-T", "10", "--count", "2000",
            "--seed", "4", "--out", "s",
        ],
        dir.path(),
    );
    assert!(sim.status.success());
    let sample = dir.path().join("s/sample.txt");
    assert!(sample.exists());

    let fit = sojourn(
        &[
            "fit",
            "--family",
            "linear",
            "--t-margin",
            "20",
            "--shift-range",
            "0",
            "--out",
            "f",
            sample.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(fit.status.success(), "stderr: {}", stderr_of(&fit));

    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("f/fit.json")).unwrap()).unwrap();
    assert_eq!(doc["n_observations"], 2000);
    let a_hat = doc["fit"]["a_hat"].as_f64().unwrap();
    assert!((a_hat - (-0.1)).abs() < 0.02, "a_hat = {a_hat}");
    assert_eq!(doc["fit"]["T_hat"].as_u64().unwrap(), 10);

    // one header plus one row per (shift, T) cell; candidates are anchored
    // at the sample maximum and run through margin + 1 supports
    let grid = fs::read_to_string(dir.path().join("f/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 21);
    let sample_max = fs::read_to_string(dir.path().join("s/sample.txt"))
        .unwrap()
        .lines()
        .map(|l| l.parse::<u32>().unwrap())
        .max()
        .unwrap();
    assert!(grid
        .lines()
        .nth(1)
        .unwrap()
        .starts_with(&format!("0,{sample_max}")));
}

#[test]
fn sequential_flag_changes_nothing() {
    let dir = tempdir().unwrap();
    sojourn(
        &[
            "simulate", "--family", "poly", "--a", "-0.002", "--c", "5", "--n", "3", "-T", "10",
            "--count", "500", "--seed", "9", "--out", "s",
        ],
        dir.path(),
    );
    let sample = dir.path().join("s/sample.txt");
    let sample = sample.to_str().unwrap();
    let par = sojourn(
        &["fit", "--t-margin", "8", "--out", "a", sample],
        dir.path(),
    );
    let seq = sojourn(
        &[
            "--sequential",
            "fit",
            "--t-margin",
            "8",
            "--out",
            "b",
            sample,
        ],
        dir.path(),
    );
    assert!(par.status.success() && seq.status.success());
    assert_eq!(
        fs::read(dir.path().join("a/fit.json")).unwrap(),
        fs::read(dir.path().join("b/fit.json")).unwrap()
    );
}

#[test]
fn malformed_data_exits_2_with_line_number() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "5\nseven\n9\n").unwrap();
    let out = sojourn(&["fit", "bad.txt"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("line 2"),
        "stderr: {}",
        stderr_of(&out)
    );

    let missing = sojourn(&["diagnose", "nope.txt"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr_of(&missing).contains("nope.txt"));
}

#[test]
fn study_emits_the_pinned_csv_header() {
    let dir = tempdir().unwrap();
    let out = sojourn(
        &[
            "study",
            "--preset",
            "l1-strong",
            "--trials",
            "5",
            "--sizes",
            "5,20",
            "--out",
            "st",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let csv = fs::read_to_string(dir.path().join("st/study.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,bias_a,var_a,mse_a,inv_fi_a,bias_c,var_c,mse_c,inv_fi_c,p_T_correct,l1_mean"
    );
    assert_eq!(csv.lines().count(), 3);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("st/study.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    assert_eq!(json["seed"], 314);
}

#[test]
fn smm_solves_and_reports_residual() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"states": 2, "T": [3, 2], "rho": [[0.5, 0.3, 0.0], [0.6, 0.0]],
            "jump": [[0.0, 1.0], [1.0, 0.0]]}"#,
    )
    .unwrap();
    let out = sojourn(&["smm", "spec.json", "--out", "m"], dir.path());
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let pi = fs::read_to_string(dir.path().join("m/pi.csv")).unwrap();
    let total: f64 = pi
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m/smm.json")).unwrap()).unwrap();
    assert!(json["result"]["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(json["T"], serde_json::json!([3, 2]));
}

#[test]
fn reducible_chain_exits_3() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"states": 3, "T": 2, "rho": [[0.5, 0.0], [0.5, 0.0], [0.5, 0.0]],
            "jump": [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]}"#,
    )
    .unwrap();
    let out = sojourn(&["smm", "spec.json"], dir.path());
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn diagnose_emits_overlays_only_with_a_fit() {
    let dir = tempdir().unwrap();
    sojourn(
        &[
            "simulate", "--family", "linear", "--a", "-0.08", "-T", "12", "--count", "400",
            "--seed", "2", "--out", "s",
        ],
        dir.path(),
    );
    let sample = dir.path().join("s/sample.txt");

    let plain = sojourn(
        &["diagnose", "--out", "d1", sample.to_str().unwrap()],
        dir.path(),
    );
    assert!(plain.status.success());
    assert!(dir.path().join("d1/rho.csv").exists());
    assert!(dir.path().join("d1/pmf.csv").exists());
    assert!(!dir.path().join("d1/qq.csv").exists());

    sojourn(
        &[
            "fit",
            "--family",
            "linear",
            "--t-margin",
            "10",
            "--out",
            "f",
            sample.to_str().unwrap(),
        ],
        dir.path(),
    );
    let with_fit = sojourn(
        &[
            "diagnose",
            "--fit",
            "f/fit.json",
            "--out",
            "d2",
            sample.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        with_fit.status.success(),
        "stderr: {}",
        stderr_of(&with_fit)
    );
    for name in ["rho.csv", "pmf.csv", "qq.csv", "overlay.csv"] {
        assert!(dir.path().join("d2").join(name).exists(), "{name} missing");
    }

    // factor estimates are probabilities
    let rho = fs::read_to_string(dir.path().join("d2/rho.csv")).unwrap();
    for line in rho.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let r: f64 = fields[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&r));
    }
}
