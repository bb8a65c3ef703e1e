use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn swrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swrl"))
        .args(args)
        .env_remove("SWRL_THREADS")
        .output()
        .expect("binary runs")
}

fn swrl_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swrl"))
        .args(args)
        .env("SWRL_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn read_manifest(out: &Path) -> Value {
    let path = format!("{}.manifest.json", out.display());
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn lowdeg_norm_binomial_sum_row() {
    let o = swrl(&[
        "lowdeg-norm",
        "--lambda",
        "0.5",
        "--n",
        "4000",
        "--degree",
        "inf",
        "--method",
        "binomial_sum",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,lambda,D,method,value,stderr,limit_value")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "4000");
    assert_eq!(row[2], "inf");
    assert_eq!(row[3], "binomial_sum");
    let value: f64 = row[4].parse().unwrap();
    assert!((value - 1.1547).abs() / 1.1547 < 0.02);
    // manifest goes to stderr when there is no --out
    let manifest: Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(manifest["config"]["subcommand"], "lowdeg-norm");
    assert_eq!(manifest["outputs"][0]["path"], "-");
}

#[test]
fn roc_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("roc.csv");
    let o = swrl(&[
        "roc",
        "--lambda",
        "0.6",
        "--n",
        "200",
        "--trials",
        "300",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let body = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(
        lines[0],
        "alpha_target,alpha_hat,beta_hat,se_alpha,se_beta,phi_lambda_alpha"
    );
    assert_eq!(lines.len(), 10);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 6);
        assert!(cells.iter().all(|c| (0.0..=1.0).contains(c)));
    }
    let manifest = read_manifest(&out);
    assert_eq!(manifest["config"]["seed"], 42);
    assert_eq!(manifest["config"]["n"], 200);
    assert_eq!(manifest["tolerances"]["quad_tol"], 1e-9);
    let digest = manifest["outputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(manifest["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = swrl_with_threads(
            &[
                "witness",
                "--lambda",
                "0.6",
                "--n",
                "200",
                "--trials",
                "300",
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        );
        assert!(o.status.success(), "{}", stderr(&o));
        (std::fs::read(&out).unwrap(), read_manifest(&out))
    };
    let (a, ma) = run("a.json", "1");
    let (b, _) = run("b.json", "1");
    let (c, mc) = run("c.json", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(ma["threads"], 1);
    assert_eq!(mc["threads"], 3);
    assert_eq!(ma["outputs"][0]["sha256"], mc["outputs"][0]["sha256"]);
}

#[test]
fn witness_json_fields() {
    let o = swrl(&[
        "witness", "--lambda", "0.6", "--n", "100", "--trials", "20000", "--source", "nested",
        "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in [
        "lambda",
        "n",
        "r",
        "val_conc_v",
        "R_hat",
        "R_stderr",
        "limit",
        "monotone_fraction",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["r"], 6);
    let r_hat = v["R_hat"].as_f64().unwrap();
    let val = v["val_conc_v"].as_f64().unwrap();
    let se = v["R_stderr"].as_f64().unwrap();
    assert!((r_hat - val).abs() <= 3.0 * se);
    assert_eq!(v["monotone_fraction"], 1.0);
}

#[test]
fn envelope_json_fields() {
    let o = swrl(&[
        "envelope",
        "--lambda",
        "0.6",
        "--exterior",
        "0.3,0.9",
        "--seed",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in [
        "A1",
        "A2",
        "val_phi",
        "val_psi",
        "val_conc_u",
        "val_conc_v",
        "points_u",
        "points_v",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v["val_conc_v"].as_f64().unwrap() > v["val_phi"].as_f64().unwrap());
}

#[test]
fn diag_top_eigenvalue_above_threshold() {
    let o = swrl(&["diag", "--lambda", "1.5", "--n", "2000", "--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "top_eigenvalue");
    let mean: f64 = row[4].parse().unwrap();
    assert!((mean - 2.1667).abs() / 2.1667 < 0.05, "{mean}");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_errors_exit_one() {
    let o = swrl(&["roc", "--lambda", "0.6", "--n", "1000", "--trials", "2000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"));

    let o = swrl(&["witness", "--lambda", "1.5", "--n", "1000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lambda"));

    let o = swrl(&["roc", "--lambda", "0.6", "--n", "1", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));

    let o = swrl(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));

    let o = swrl(&[
        "roc",
        "--lambda",
        "0.6",
        "--n",
        "100",
        "--seed",
        "1",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_guard_exits_two() {
    // one millionth above the curve: the squared val gap falls below 1e-8
    let o = swrl(&[
        "envelope",
        "--lambda",
        "0.6",
        "--exterior",
        "0.3,0.479257464",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("margin"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"lambda": 0.3, "n": 3, "seed": 11, "method": "exact_enum", "degree": "2", "prior": {"kind": "rademacher"}}"#,
    )
    .unwrap();
    let o = swrl(&[
        "lowdeg-norm",
        "--config",
        cfg.to_str().unwrap(),
        "--lambda",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "3");
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(row[2], "2");
    assert_eq!(row[3], "exact_enum");

    std::fs::write(&cfg, r#"{"lambda": 0.3, "bogus": 1}"#).unwrap();
    let o = swrl(&[
        "lowdeg-norm",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
