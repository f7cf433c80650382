use std::fs;
use std::process::{Command, Output};

use mbl_entangle::scaling::{write_curves_csv, CurvePoint, DisorderCurve, Indicator};

fn mblent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mblent"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn validate_succeeds() {
    let out = mblent(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 8);
}

#[test]
fn missing_config_names_the_path() {
    let out = mblent(&["run", "--config", "/definitely/not/here.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("/definitely/not/here.cfg"));
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let out = mblent(&["run", "--length", "4", "--bond-dimm", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bond_dimm"));
}

#[test]
fn invalid_values_are_validation_errors() {
    assert_eq!(mblent(&["run", "--n-realizations", "0"]).status.code(), Some(1));
    assert_eq!(mblent(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mblent(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "length = 6\nw_list = 1, 4\nn_realizations = 2\nn_states = 2\ngeometric = false\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = mblent(&[
        "run",
        "--seed",
        "3",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 2 * 2 * 2);
    let saved = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(saved.lines().any(|l| l.replace(' ', "") == "seed=3"));
    assert!(saved.lines().any(|l| l.replace(' ', "") == "length=6"));
}

#[test]
fn collapse_prints_ranked_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let curves: Vec<DisorderCurve> = [8usize, 10, 12]
        .iter()
        .map(|&l| {
            let lf = l as f64;
            let points = (1..=16)
                .map(|k| {
                    let w = 0.5 * k as f64;
                    CurvePoint {
                        w,
                        mean: lf.powf(-0.5) * (lf.powf(0.6) * (w - 3.7)).tanh(),
                        stderr: 0.0,
                        n: 10,
                    }
                })
                .collect();
            DisorderCurve::new(l, Indicator::CAvgNn, points).unwrap()
        })
        .collect();
    write_curves_csv(fs::File::create(&path).unwrap(), &curves).unwrap();
    let out = mblent(&[
        "collapse",
        "--curves",
        path.to_str().unwrap(),
        "--grid",
        "a=0.3:0.7:0.1,b=0.4:0.8:0.1,wc=3.0:4.5:0.1",
        "--top",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].contains("quality"));
    let q: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert!(q.windows(2).all(|w| w[0] <= w[1]));

    let bad = mblent(&["collapse", "--curves", path.to_str().unwrap(), "--grid", "a=1:0:0.1"]);
    assert_eq!(bad.status.code(), Some(1));
}
