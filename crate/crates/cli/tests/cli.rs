use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const MODEL: [&str; 8] = [
    "--theta",
    "0.3",
    "--alpha",
    "0.5",
    "--eps",
    "gaussian:1",
    "--eta",
    "gaussian:0.1",
];

fn rcar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcar"))
        .args(args)
        .env_remove("RCAR_SEED")
        .output()
        .expect("spawn rcar")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_series(path: &Path, xs: &[f64]) {
    let mut s = String::from("t,x\n");
    for (t, x) in xs.iter().enumerate() {
        s.push_str(&format!("{t},{x}\n"));
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn check_reports_second_moment_radius() {
    let out = rcar(&[
        "check",
        "--theta",
        "0.3",
        "--alpha",
        "0",
        "--eta",
        "gaussian:0.2",
        "--eps",
        "gaussian:1",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert!((v["rho_M"].as_f64().unwrap() - 0.29).abs() < 1e-10);
    assert_eq!(v["provenance"]["tool"], "rcar");
    assert_eq!(v["provenance"]["seed"], 0);
}

#[test]
fn check_exit_codes() {
    let explosive = rcar(&[
        "check",
        "--theta",
        "0.95",
        "--alpha",
        "0.5",
        "--eps",
        "gaussian:1",
        "--eta",
        "gaussian:0.1",
    ]);
    assert_eq!(explosive.status.code(), Some(4));
    let boundary = format!("{}", std::f64::consts::FRAC_1_SQRT_2);
    let pathological = rcar(&[
        "check",
        "--theta",
        &boundary,
        "--alpha",
        "0",
        "--eps",
        "gaussian:1",
        "--eta",
        "gaussian:0.01",
    ]);
    assert_eq!(pathological.status.code(), Some(5));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(
        rcar(&["variance", "--theta", "0.3", "--eps", "gaussian:1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rcar(&["check", "--theta", "0.3", "--eps", "cauchy:1", "--eta", "none"])
            .status
            .code(),
        Some(2)
    );
    let mut args = vec!["variance"];
    args.extend(MODEL);
    args.extend(["--format", "csv"]);
    assert_eq!(rcar(&args).status.code(), Some(2));
    assert_eq!(rcar(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn variance_keys() {
    let mut args = vec!["variance"];
    args.extend(MODEL);
    let out = rcar(&args);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in [
        "theta_star",
        "vartheta_star",
        "kappa2",
        "omega2",
        "Sigma",
        "Psi",
        "psi0",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!((v["theta_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn moments_fourth_order_keys() {
    let mut args = vec!["moments", "--order", "4", "--max-lag", "3"];
    args.extend(MODEL);
    let v = json(&rcar(&args));
    for key in ["M", "N", "Lambda", "acvf", "H", "G", "Delta", "Lambda5"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["acvf"]["values"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_gamma_series_has_unit_p_value() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    let xs: Vec<f64> = (0..=150)
        .map(|t| {
            if t % 3 == 0 {
                1.0 + (t % 5) as f64
            } else {
                0.0
            }
        })
        .collect();
    write_series(&path, &xs);
    let out = rcar(&["test", "--in", path.to_str().unwrap(), "--level", "0.05"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    assert_eq!(v["p_value"].as_f64(), Some(1.0));
    assert_eq!(v["reject"], false);
}

#[test]
fn degenerate_and_malformed_input_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.csv");
    write_series(&zeros, &[0.0; 100]);
    assert_eq!(
        rcar(&["estimate", "--in", zeros.to_str().unwrap()])
            .status
            .code(),
        Some(3)
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x\n0,1.0\n1,oops\n").unwrap();
    let out = rcar(&["estimate", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn region_grid_csv() {
    let out = rcar(&[
        "region",
        "--theta-range",
        "-1:1:0.05",
        "--alpha-range",
        "-1:1:0.05",
        "--eta",
        "gaussian:0.1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,alpha,rho_M,rho_H"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 41 * 41);
    let origin = rows
        .iter()
        .find(|r| r[0].abs() < 1e-12 && r[1].abs() < 1e-12)
        .expect("grid contains the origin");
    assert!((origin[2] - 0.1).abs() < 1e-9);
}

#[test]
fn simulate_estimate_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut args = vec![
        "simulate",
        "--n",
        "3000",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend(MODEL);
    assert_eq!(rcar(&args).status.code(), Some(0));

    let params = rcar_core::ModelParams::new(
        0.3,
        0.5,
        rcar_core::NoiseSpec::gaussian(1.0).unwrap(),
        Some(rcar_core::NoiseSpec::gaussian(0.1).unwrap()),
    )
    .unwrap();
    let traj =
        rcar_core::simulate::simulate(&params, 3000, 11, rcar_core::simulate::DEFAULT_BURN_IN)
            .unwrap();
    let loaded = rcar_core::simulate::ingest(&path).unwrap();
    assert_eq!(loaded.values(), traj.values());

    let want =
        rcar_core::estimate::correlation_test(&traj, &rcar_core::TestOptions::default()).unwrap();
    let v = json(&rcar(&["estimate", "--in", path.to_str().unwrap()]));
    assert_eq!(v["statistic"].as_f64(), Some(want.statistic));
    assert_eq!(v["theta_hat"].as_f64(), Some(want.theta_hat));
    assert_eq!(v["tau2_bar"].as_f64(), Some(want.tau2_bar));
}

#[test]
fn seed_falls_back_to_environment() {
    let mut args = vec!["simulate", "--n", "20"];
    args.extend(MODEL);
    let run = |seed: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rcar"));
        cmd.args(&args).env_remove("RCAR_SEED");
        if let Some(s) = seed {
            cmd.env("RCAR_SEED", s);
        }
        cmd.output().unwrap().stdout
    };
    let mut explicit = args.clone();
    explicit.extend(["--seed", "42"]);
    assert_eq!(run(Some("42")), rcar(&explicit).stdout);
    assert_ne!(run(Some("42")), run(None));
}

#[test]
fn run_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "theta = 0.3\nalpha = 0\neps.family = \"gaussian\"\neps.scale = 1\neta.family = \"gaussian\"\neta.scale = 0.2\n",
    )
    .unwrap();
    let v = json(&rcar(&["check", "--config", cfg.to_str().unwrap()]));
    assert!((v["rho_M"].as_f64().unwrap() - 0.29).abs() < 1e-10);
    let v = json(&rcar(&[
        "check",
        "--config",
        cfg.to_str().unwrap(),
        "--theta",
        "0.5",
    ]));
    assert!((v["rho_M"].as_f64().unwrap() - 0.45).abs() < 1e-10);
    std::fs::write(&cfg, "theta = 0.3\ngamma = 1\n").unwrap();
    assert_eq!(
        rcar(&["check", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn mc_output_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let path = dir.path().join(name);
        let mut args = vec![
            "mc",
            "--experiment",
            "clt_mean",
            "--n",
            "300",
            "--replicates",
            "120",
            "--seed",
            "5",
        ];
        args.extend(MODEL);
        args.extend(["--workers", workers, "--out", path.to_str().unwrap()]);
        assert_eq!(rcar(&args).status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let one = run("1", "a.json");
    assert_eq!(one, run("3", "b.json"));
    let v: Value = serde_json::from_slice(&one).unwrap();
    for key in ["targets", "empirical", "tolerance", "pass"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
