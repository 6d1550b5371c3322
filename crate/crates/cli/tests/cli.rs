use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ddcc_core::solver::EquilibriumPoint;
use serde_json::Value;
use tempfile::TempDir;

fn game() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../games/three_follower.json")
}

fn ddcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddcc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn edited_game(dir: &TempDir, name: &str, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(game()).unwrap();
    assert!(text.contains(from));
    let path = dir.path().join(name);
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

#[test]
fn solve_reference_game() {
    let out = ddcc(&["solve", path_str(&game())]);
    assert_eq!(out.status.code(), Some(0));
    let pt: EquilibriumPoint = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(pt.x_star, vec![8.0]);
    for (y, want) in pt.y_star.iter().zip([8.177, 6.824, 6.305]) {
        assert!((y - want).abs() < 1e-3);
    }
}

#[test]
fn solve_input_errors() {
    let out = ddcc(&["solve", "/nonexistent/game.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());

    let dir = TempDir::new().unwrap();
    let bad = edited_game(&dir, "neg.json", "\"budget\": 20.0", "\"budget\": -1.0");
    let out = ddcc(&["solve", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("budget must be a positive constant"), "{err}");

    let out = ddcc(&["solve"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_reports_non_convergence() {
    let out = ddcc(&["solve", path_str(&game()), "--max-sweeps", "1", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did not converge"), "{err}");

    let out = ddcc(&["solve", path_str(&game()), "--damping", "0.5", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let out = ddcc(&["solve", path_str(&game()), "--damping", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ddcc(&["sweep", path_str(&game()), "--rho", "1,2", "--max-sweeps", "1", "--grid", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains("did not converge")), "{text}");
}

#[test]
fn optimistic_scan_agrees_on_reference_game() {
    let plain: EquilibriumPoint =
        serde_json::from_slice(&ddcc(&["solve", path_str(&game())]).stdout).unwrap();
    let scanned: EquilibriumPoint =
        serde_json::from_slice(&ddcc(&["solve", path_str(&game()), "--optimistic"]).stdout).unwrap();
    assert_eq!(plain.x_star, scanned.x_star);
    assert_eq!(plain.y_star, scanned.y_star);
}

#[test]
fn paper_literal_orientation() {
    let out = ddcc(&["solve", path_str(&game()), "--orientation", "paper-literal"]);
    assert_eq!(out.status.code(), Some(0));
    let pt: EquilibriumPoint = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(pt.y_star, vec![0.0; 3]);

    let out = ddcc(&["solve", path_str(&game()), "--orientation", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_stable_and_matches_solve() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = ddcc(&["sweep", path_str(&game()), "--rho", "10,1,5", "--seed", "3", "--out", path_str(p)]);
        assert_eq!(out.status.code(), Some(0));
        let result = json(&out);
        assert_eq!(result["rows"].as_array().unwrap().len(), 3);
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let rhos: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(rhos, ["1", "5", "10"]);

    // rho = 1 reproduces the plain solve
    let solved: EquilibriumPoint =
        serde_json::from_slice(&ddcc(&["solve", path_str(&game())]).stdout).unwrap();
    let sweep = json(&ddcc(&["sweep", path_str(&game()), "--rho", "1", "--out", path_str(&a)]));
    let row = &sweep["rows"][0];
    let ys: Vec<f64> = serde_json::from_value(row["y_star"].clone()).unwrap();
    assert_eq!(ys, solved.y_star);
    assert_eq!(row["leader_payoff"].as_f64().unwrap(), solved.leader_payoff);
}

#[test]
fn sweep_failures_recorded_in_rows() {
    let out = ddcc(&["sweep", path_str(&game()), "--rho", "0.5,1"]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.5,,"));
    assert!(lines[2].ends_with(",ok"));

    let out = ddcc(&["sweep", path_str(&game()), "--rho", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_paths() {
    let dir = TempDir::new().unwrap();
    let point = dir.path().join("point.json");
    let out = ddcc(&["solve", path_str(&game()), "--out", path_str(&point)]);
    assert_eq!(out.status.code(), Some(0));

    let out = ddcc(&["verify", path_str(&game()), path_str(&point)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["passed"], Value::Bool(true));
    assert_eq!(report["certificate"]["grid_n"], 1001);

    let out = ddcc(&["verify", path_str(&game()), path_str(&point), "--bilevel", "--grid", "65"]);
    assert_eq!(out.status.code(), Some(0));

    // hand-edited point: follower 1 below its cone boundary
    let mut pt: Value = serde_json::from_str(&std::fs::read_to_string(&point).unwrap()).unwrap();
    pt["y_star"][0] = Value::from(4.0);
    let edited = dir.path().join("edited.json");
    std::fs::write(&edited, pt.to_string()).unwrap();
    let out = ddcc(&["verify", path_str(&game()), path_str(&edited)]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out);
    assert!(report["certificate"]["follower_checks"][0].as_f64().unwrap() > 1.0);

    // a game failing its assumptions
    let bad = edited_game(&dir, "origin.json", "\"box\": [0.0, 20.0]", "\"box\": [1.0, 20.0]");
    let out = ddcc(&["verify", path_str(&bad), path_str(&point)]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out);
    assert_eq!(report["assumptions"]["passed"], Value::Bool(false));

    // a point outside the cone
    pt["y_star"][0] = Value::from(9.0);
    std::fs::write(&edited, pt.to_string()).unwrap();
    let out = ddcc(&["verify", path_str(&game()), path_str(&edited)]);
    assert_eq!(out.status.code(), Some(3));

    let out = ddcc(&["verify", path_str(&game()), "/nonexistent/point.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_examples() {
    let out = ddcc(&[
        "oracle", "--slack", "3.646034070326145", "--spread", "0.6686305040723332",
        "--gamma1", "0.01", "--gamma2", "1.01",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["closed_form"]["value"].as_f64().unwrap() - 0.95).abs() < 1e-12);
    assert!(v["gap"].as_f64().unwrap() <= 2e-3);

    let v = json(&ddcc(&[
        "oracle", "--slack", "1", "--spread", "0", "--gamma1", "0.01", "--gamma2", "1.01",
    ]));
    assert_eq!(v["closed_form"]["value"], 1.0);
    assert_eq!(v["grid"]["value"], 1.0);

    let v = json(&ddcc(&[
        "oracle", "--slack", "0.01", "--spread", "1", "--gamma1", "0.25", "--gamma2", "2",
    ]));
    assert_eq!(v["closed_form"]["kind"], "infeasible");
    assert_eq!(v["grid"]["kind"], "infeasible");

    let out = ddcc(&["oracle", "--slack", "1", "--spread", "1", "--gamma1", "0.5", "--gamma2", "0.4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn moments_from_csv() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("samples.csv");
    std::fs::write(&path, "value\n1\n2\n3\n").unwrap();
    let v = json(&ddcc(&["moments", path_str(&path), "--follower", "2"]));
    assert_eq!(v["mean"], 2.0);
    assert!((v["variance"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(v["samples"], 3);

    std::fs::write(&path, "value\n").unwrap();
    let out = ddcc(&["moments", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
}
