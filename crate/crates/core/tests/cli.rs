use std::process::Command;

use hullthresh::cli::{self, emit_plot_data};
use hullthresh::polytope::{SweepGrid, SweepRow};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hullthresh").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s.trim()).unwrap()
}

#[test]
fn dist_info_exponential() {
    let (code, out, _) = run(&["dist", "info", "--measure", "exp"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["x_star"], "inf");
    assert_eq!(v["t_star"], 1.0);
    assert_eq!(v["admissible"], true);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["config"].is_object());
}

#[test]
fn rademacher_constants() {
    let (code, out, _) = run(&[
        "threshold",
        "constants",
        "--measure",
        "rademacher",
        "--n",
        "10",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    let kappa = v["kappa_vol"].as_f64().unwrap();
    assert!((kappa - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-10);
    assert_eq!(v["admissible"], false);
    for key in [
        "t1",
        "var_star",
        "beta",
        "kappa_vol",
        "rho1_lower",
        "rho2_upper",
        "admissible",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn window_is_null_when_not_applicable() {
    let (code, out, _) = run(&[
        "threshold",
        "constants",
        "--measure",
        "uniform",
        "--n",
        "10",
        "--delta",
        "0.25",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["rho1_lower"].is_null());
    assert!(v["kappa_vol"].is_number());

    let (_, out, _) = run(&[
        "threshold",
        "constants",
        "--measure",
        "uniform",
        "--n",
        "100",
    ]);
    let v = json(&out);
    let (t1, beta) = (v["t1"].as_f64().unwrap(), v["beta"].as_f64().unwrap());
    let want = (1.0 - (8.0 * beta / 25.0).sqrt()) * t1;
    assert!((v["rho1_lower"].as_f64().unwrap() - want).abs() < 1e-12);
    assert!((v["rho2_upper"].as_f64().unwrap() - 1.1 * t1).abs() < 1e-12);
}

#[test]
fn cramer_table_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let p = path.to_str().unwrap();
    let (code, _, _) = run(&[
        "cramer",
        "table",
        "--measure",
        "exp",
        "--x-min",
        "0",
        "--x-max",
        "3",
        "--steps",
        "4",
        "--out",
        p,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# hullthresh "));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["x", "lambda_star", "h", "m", "ratio"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let x: f64 = rows[2][0].parse().unwrap();
    let ls: f64 = rows[2][1].parse().unwrap();
    let s = (1.0 + x * x).sqrt();
    assert!((ls - (s - 1.0 - ((s + 1.0) / 2.0).ln())).abs() < 1e-12);
    assert_eq!(&rows[0][4], "nan");
}

#[test]
fn validation_errors_exit_two() {
    for args in [
        vec!["dist", "info", "--measure", "pnorm"],
        vec!["dist", "info", "--measure", "cauchy"],
        vec!["dist", "info", "--measure", "uniform", "--p", "2"],
        vec!["dist", "info", "--measure", "tabulated"],
        vec![
            "cramer",
            "table",
            "--measure",
            "uniform",
            "--x-min",
            "0",
            "--x-max",
            "1",
            "--steps",
            "3",
        ],
        vec![
            "cramer",
            "table",
            "--measure",
            "exp",
            "--x-min",
            "0",
            "--x-max",
            "1",
            "--steps",
            "1",
        ],
        vec![
            "threshold",
            "constants",
            "--measure",
            "exp",
            "--n",
            "5",
            "--delta",
            "0.7",
        ],
        vec!["threshold", "constants", "--measure", "exp", "--n", "0"],
        vec![
            "simulate",
            "sweep",
            "--measure",
            "uniform",
            "--n",
            "2",
            "--rho-min",
            "0.5",
            "--rho-max",
            "1",
            "--rho-steps",
            "3",
            "--replicates",
            "1",
            "--test-points",
            "10",
        ],
        vec![
            "simulate",
            "sweep",
            "--measure",
            "uniform",
            "--n",
            "2",
            "--rho-min",
            "1",
            "--rho-max",
            "0.5",
            "--rho-steps",
            "3",
            "--replicates",
            "1",
            "--test-points",
            "10",
            "--seed",
            "1",
        ],
    ] {
        let (code, _, err) = run(&args);
        assert_eq!(code, 2, "{args:?}: {err}");
        assert!(!err.trim().is_empty());
    }
}

const SWEEP: [&str; 18] = [
    "simulate",
    "sweep",
    "--measure",
    "uniform",
    "--n",
    "3",
    "--rho-min",
    "0.3",
    "--rho-max",
    "1.5",
    "--rho-steps",
    "4",
    "--replicates",
    "2",
    "--test-points",
    "150",
    "--seed",
    "9",
];

#[test]
fn sweep_output_is_deterministic() {
    let (code, a, _) = run(&SWEEP);
    assert_eq!(code, 0);
    let (_, b, _) = run(&SWEEP);
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "n,rho,N,mean,ci_half,replicates,test_points");
    assert_eq!(lines.len(), 6);
    let tail = json(lines[5]);
    for key in [
        "rho_hat_low",
        "rho_hat_high",
        "t1_reference",
        "config",
        "version",
    ] {
        assert!(tail.get(key).is_some(), "missing {key}");
    }
    let mut other = SWEEP.to_vec();
    other[17] = "10";
    assert_ne!(run(&other).1, a);
}

#[test]
fn sweep_budget_and_plot_file() {
    let mut args = SWEEP.to_vec();
    args.extend(["--op-cap", "100"]);
    let (code, _, err) = run(&args);
    assert_eq!(code, 2);
    assert!(err.contains("budget"));

    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.txt");
    let mut args = SWEEP.to_vec();
    args.extend(["--plot-data", plot.to_str().unwrap()]);
    assert_eq!(run(&args).0, 0);
    let text = std::fs::read_to_string(&plot).unwrap();
    let blocks: Vec<&str> = text.split("\n\n\n").collect();
    assert_eq!(blocks.len(), 2);
    assert!(blocks[1].lines().any(|l| l.starts_with("t1 ")));
}

fn grid(rows: Vec<SweepRow>) -> SweepGrid {
    SweepGrid {
        n: 3,
        delta: 0.25,
        rows,
        replicate_means: vec![],
        rho_hat_low: None,
        rho_hat_high: None,
    }
}

#[test]
fn plot_data_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    let cfg = Value::Null;
    assert!(emit_plot_data(&grid(vec![]), 0.7, None, &path, &cfg).is_err());
    let row = SweepRow {
        n: 3,
        rho: 0.5,
        big_n: 5,
        mean: 0.4,
        ci_half: 0.1,
        replicates: 1,
        test_points: 10,
    };
    emit_plot_data(&grid(vec![row]), 0.7, None, &path, &cfg).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let curve: Vec<&str> = text.lines().filter(|l| l.starts_with("0.5 ")).collect();
    assert_eq!(curve.len(), 1);
    assert!(!text.contains("rho_hat"));
}

#[test]
fn tabulated_density_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tri.csv");
    let mut s = String::from("x,f\n");
    for k in 0..=40 {
        let x = -1.0 + k as f64 / 20.0;
        s.push_str(&format!("{x},{}\n", 1.0 - f64::abs(x)));
    }
    std::fs::write(&path, s).unwrap();
    let (code, out, err) = run(&[
        "dist",
        "info",
        "--measure",
        "tabulated",
        "--density",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v = json(&out);
    assert!(v["admissible"].is_null());
    assert!((v["x_star"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn binary_exit_codes_and_env_cap() {
    let bin = env!("CARGO_BIN_EXE_hullthresh");
    let ok = Command::new(bin)
        .args(["dist", "info", "--measure", "uniform"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["dist", "info"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let capped = Command::new(bin)
        .args(SWEEP)
        .env("HULLTHRESH_OP_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(2));
    let stderr = String::from_utf8(capped.stderr).unwrap();
    assert_eq!(stderr.trim().lines().count(), 1);
}
