//! Problem files, trajectory and certificate documents, and run outputs.

use std::fs;

use nalgebra::DVector;

use ratepmp::experiment::{paper_problem, run_naive_experiment, RunOptions, DEFAULT_X0};
use ratepmp::io::{load_certificate, load_problem, load_trajectory, save_json, save_problem, write_outputs};
use ratepmp::{recover_multipliers, solve_ocp, Error, QpSettings};

fn x0() -> DVector<f64> {
    DVector::from_column_slice(&DEFAULT_X0)
}

fn parse_table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').skip(1).map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn problem_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.json");
    let spec = paper_problem(&x0()).unwrap();
    save_problem(&spec, &path).unwrap();
    assert_eq!(load_problem(&path).unwrap(), spec);
}

#[test]
fn short_rate_bounds_are_rejected_by_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.json");
    save_problem(&paper_problem(&x0()).unwrap(), &path).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    doc["rate_bounds"].as_array_mut().unwrap().pop();
    fs::write(&path, doc.to_string()).unwrap();
    let msg = load_problem(&path).unwrap_err().to_string();
    assert!(msg.contains("rate_bounds"), "{msg}");
}

#[test]
fn trajectory_and_certificate_documents_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = paper_problem(&x0()).unwrap();
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    save_json(&traj, &dir.path().join("t.json")).unwrap();
    save_json(&cert, &dir.path().join("c.json")).unwrap();
    assert_eq!(load_trajectory(&dir.path().join("t.json")).unwrap(), traj);
    assert_eq!(load_certificate(&dir.path().join("c.json")).unwrap(), cert);
}

#[test]
fn output_tables_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_naive_experiment(&x0(), &RunOptions::default()).unwrap();
    write_outputs(&rec, dir.path()).unwrap();
    for name in [
        "states.csv",
        "controls.csv",
        "rates.csv",
        "naive_states.csv",
        "naive_controls.csv",
        "naive_rates.csv",
        "report.json",
        "summary.txt",
        "trajectory.json",
        "certificate.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let (sh, states) = parse_table(&fs::read_to_string(dir.path().join("states.csv")).unwrap());
    assert_eq!(sh, ["t", "x_1", "x_2", "x_3"]);
    assert_eq!(states.len(), 31);
    let (ch, controls) = parse_table(&fs::read_to_string(dir.path().join("controls.csv")).unwrap());
    assert_eq!(ch, ["t", "u_1"]);
    let rates_text = fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert!(!rates_text.contains('\r'));
    let (rh, rates) = parse_table(&rates_text);
    assert_eq!(rh, ["t", "abs_rate_1"]);
    assert_eq!(rates.len(), 29);
    for (t, r) in rates.iter().enumerate() {
        let recomputed = (controls[t + 1][0] - controls[t][0]).abs();
        assert!((r[0] - recomputed).abs() <= 1e-15);
    }
    // round-trip formatting reproduces the controls exactly
    for (t, u) in rec.designed.u.iter().enumerate() {
        assert_eq!(controls[t][0], u[0]);
    }
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("x0: (2, 2, 1)"));
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let rec = run_naive_experiment(&x0(), &RunOptions::default()).unwrap();
        write_outputs(&rec, dir.path()).unwrap();
    }
    for name in ["states.csv", "controls.csv", "rates.csv", "naive_controls.csv", "report.json", "summary.txt"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn unwritable_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let rec = run_naive_experiment(&x0(), &RunOptions::default()).unwrap();
    assert!(matches!(write_outputs(&rec, &blocker.join("out")), Err(Error::Io(_))));
}
