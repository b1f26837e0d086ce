use std::path::Path;
use std::process::{Command, Output};

use epca_core::dsl::builtin;
use epca_core::solve;
use serde_json::Value;

fn epca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epca"))
        .args(args)
        .env_remove("EPCA_PRECISION")
        .output()
        .expect("run epca")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn write_problem(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_reaches_table_value() {
    let o = epca(&["solve", "--problem", "example2", "--h", "0.1", "--t-end", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let last = stdout(&o).lines().last().unwrap().to_string();
    let cols: Vec<&str> = last.split(',').collect();
    assert_eq!(cols[1], "5.00000000");
    assert_eq!(cols[2], "0.85780000");
}

#[test]
fn step_guard_is_a_usage_error() {
    let o = epca(&["solve", "--problem", "example2", "--h", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("h0"));
    let o = epca(&["solve", "--problem", "example1", "--h", "1.0"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn negative_delay_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(
        dir.path(),
        "shrink.prob",
        "dim = 1\nlambda = 0.5\nhorizon = 2\n[f]\nx1 = -xd1\n[g]\ntau = -1\n[history]\ntail = 1\n",
    );
    let out = dir.path().join("traj.csv");
    let o = epca(&["solve", "--problem", &p, "--h", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 2);
    let o = epca(&["solve", "--problem", &p, "--h", "0.1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["status"]["kind"], "TauNegative");
}

#[test]
fn csv_matches_memory_to_printed_precision() {
    let o = epca(&["solve", "--problem", "example2", "--h", "0.01"]);
    let b = builtin("example2").unwrap();
    let traj = solve(&b.problem, 0.01, 5.0).unwrap();
    let mut nodes = 0;
    for line in stdout(&o).lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if !cols[4].is_empty() {
            continue; // impulse row
        }
        let t: f64 = cols[1].parse().unwrap();
        let x: f64 = cols[2].parse().unwrap();
        let tau: f64 = cols[3].parse().unwrap();
        assert!((x - traj.eval_x(&b.problem.history, t).unwrap()[0]).abs() <= 5e-9);
        assert!((tau - traj.eval_tau(t).unwrap()).abs() <= 5e-9);
        nodes += 1;
    }
    assert_eq!(nodes, 501);
}

#[test]
fn json_is_lossless() {
    let o = epca(&["solve", "--problem", "example1", "--h", "0.1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["schema"], 1);
    let b = builtin("example1").unwrap();
    let traj = solve(&b.problem, 0.1, 4.0).unwrap();
    let nodes = v["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), traj.nodes.len());
    for (n, m) in nodes.iter().zip(&traj.nodes) {
        assert_eq!(n["x"][0].as_f64().unwrap().to_bits(), m.x[0].to_bits());
        assert_eq!(n["tau"].as_f64().unwrap().to_bits(), m.tau.to_bits());
    }
}

#[test]
fn precision_from_flag_and_environment() {
    let o = epca(&["solve", "--problem", "example2", "--h", "0.1", "--precision", "3"]);
    assert!(stdout(&o).lines().last().unwrap().starts_with("50,5.000,0.858,"));
    let o = Command::new(env!("CARGO_BIN_EXE_epca"))
        .args(["solve", "--problem", "example2", "--h", "0.1"])
        .env("EPCA_PRECISION", "4")
        .output()
        .unwrap();
    assert!(stdout(&o).lines().last().unwrap().starts_with("50,5.0000,0.8578,"));
}

#[test]
fn reference_method_is_selectable() {
    let o = epca(&["solve", "--problem", "example1", "--h", "0.001", "--method", "reference", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["method"], "reference");
    let last = v["nodes"].as_array().unwrap().last().unwrap().clone();
    assert!((last["x"][0].as_f64().unwrap() - ((-4.0f64).exp() + 1.0)).abs() < 1e-9);
    let o = epca(&["solve", "--problem", "example1", "--h", "0.1", "--method", "euler"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn table_rows() {
    let o = epca(&["table", "--problem", "example1", "--h", "0.01", "--times", "1,2,3,4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("0.01,4.00000000")).unwrap();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols[3], "1.01527840");
    assert_eq!(cols[5], "3.037e-3");

    let o = epca(&["table", "--problem", "example2", "--h", "0.001", "--times", "1,2,3,4,5", "--format", "json"]);
    let v = json(&o);
    let row = &v["blocks"][0]["rows"][1];
    assert!((row["tau_h"].as_f64().unwrap() - 2.62428141).abs() < 5e-9);
    assert!((row["e_tau"].as_f64().unwrap() - 8.156e-6).abs() < 5e-10);
}

#[test]
fn table_edge_cases() {
    let o = epca(&["table", "--problem", "example1", "--h", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);

    let o = epca(&["table", "--problem", "example1", "--h", "0.1,0.03", "--times", "1,1.05"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(err.contains("h = 0.1, t = 1.05"));
    assert!(err.contains("h = 0.03, t = 1"));
}

#[test]
fn table_against_oracle_for_file_problem() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(dir.path(), "ex2.prob", epca_core::dsl::EXAMPLE2_SRC);
    let o = epca(&["table", "--problem", &p, "--h", "0.1", "--times", "1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let e = json(&o)["blocks"][0]["rows"][0]["e_x"].as_f64().unwrap();
    assert!(e < 1e-8);
}

#[test]
fn order_study() {
    let o = epca(&["order", "--problem", "example1", "--h-base", "0.1", "--levels", "3", "--times", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let order = v["estimate"]["fitted_order"].as_f64().unwrap();
    assert!((0.8..=1.15).contains(&order));
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);

    let o = epca(&["order", "--problem", "example2", "--h-base", "0.1", "--times", "1,2"]);
    assert_eq!(json(&o)["estimate"]["status"], "FloorLimited");

    let o = epca(&["order", "--problem", "example1", "--h-base", "0.1", "--levels", "2", "--times", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn order_fails_when_levels_fail() {
    let o = epca(&["order", "--problem", "example2", "--h-base", "1.0", "--factor", "1.5", "--times", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn certificates() {
    let o = epca(&["certify", "--problem", "example2", "--h", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["verdict"], "StrictlyIncreasing");
    assert!(v["constants"]["M1"].as_f64().unwrap() > 5.0);

    let o = epca(&["certify", "--problem", "example1", "--h", "0.01"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!json(&o)["monotonicity"]["sign_changes"].as_array().unwrap().is_empty());

    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(
        dir.path(),
        "fast.prob",
        "dim = 1\nlambda = 1\nhorizon = 1\n[f]\nx1 = 0\n[g]\ntau = 2\n[history]\ntail = 0\n",
    );
    let o = epca(&["certify", "--problem", &p, "--h", "0.1"]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)));
    assert_eq!(json(&o)["monotonicity"]["max_g_along_path"], 2.0);
}

#[test]
fn parse_errors_point_into_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_problem(dir.path(), "bad.prob", "dim = 1\nlambda = 1\nhorizon = 1\n[f]\nx1 = 2 *\n");
    let o = epca(&["solve", "--problem", &p, "--h", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5, column 9"));
}

#[test]
fn exit_codes_are_stable() {
    for _ in 0..3 {
        assert_eq!(epca(&["certify", "--problem", "example1", "--h", "0.1"]).status.code(), Some(3));
    }
    assert_eq!(epca(&["nonsense"]).status.code(), Some(1));
    assert_eq!(epca(&["--help"]).status.code(), Some(0));
}
