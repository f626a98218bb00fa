use std::fs;
use std::process::{Command, Output};

fn hetnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn analyze_echoes_config_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    fs::write(
        &cfg,
        r#"{"lambda_m_per_min_m2": 1e-4, "policy": {"kind": "csa"}, "beta_db": 0}"#,
    )
    .unwrap();
    let out = hetnet(&["analyze", "--config", cfg.to_str().unwrap(), "--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stderr.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["lambda_m_per_min_m2"].as_f64(), Some(1e-4));
    assert_eq!(v["config"]["policy"]["kind"], "csa");
    assert_eq!(v["config"]["beta"].as_f64(), Some(1.0));
    assert!(v["load"]["zeta_center"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_writes_identical_csv_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = hetnet(&[
            "sweep",
            "--variable",
            "lambda_m",
            "--values",
            "0.5e-4,1e-4,2e-4,4e-4",
            "--out",
            path.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("lambda_m_per_min_m2,status,zeta_center"));
    assert!(!text.contains('\r'));
}

#[test]
fn sweep_marks_failed_points() {
    let out = hetnet(&[
        "sweep",
        "--variable",
        "p_m",
        "--values",
        "0.3,0.6,1.2",
        "--outputs",
        "b_ccu,b_ceu",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "p_m,status,b_ccu,b_ceu");
    assert!(lines[3].contains("error:"));
    assert!(lines[3].ends_with(",,"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"policy": {"kind": "ssa", "p_m": 0}}"#).unwrap();
    let out = hetnet(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_m"));

    let out = hetnet(&[
        "sweep",
        "--variable",
        "lambda_m",
        "--values",
        "2e-4,1e-4,3e-4",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = hetnet(&["analyze", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = hetnet(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    fs::write(
        &cfg,
        r#"{"lambda_m_per_min_m2": 2e-4, "solver": {"tol": 1e-6, "max_iter": 2, "series_tol": 1e-8, "series_max_terms": 1000}}"#,
    )
    .unwrap();
    let out = hetnet(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("load"));
}

#[test]
fn fair_pm_balances_blocking() {
    let out = hetnet(&["fair-pm", "--tol", "1e-4", "--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = v["p_m"].as_f64().unwrap();
    assert!(p > 0.05 && p < 0.95);
    assert!((v["b_ccu"].as_f64().unwrap() - v["b_ceu"].as_f64().unwrap()).abs() < 1e-4);
}

#[test]
fn validate_is_reproducible_for_a_seed() {
    let args = ["validate", "--mc-trials", "4000", "--seed", "3", "--quiet"];
    let a = hetnet(&args);
    let b = hetnet(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("quantity,class,analytic,simulated,stderr,z\n"));
    assert!(text.contains("blocking,ceu,"));
}
