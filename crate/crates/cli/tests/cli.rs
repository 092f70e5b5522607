//! End-to-end runs of the `ratepmp` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn ratepmp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratepmp"))
        .args(args)
        .current_dir(cwd)
        .env("RATEPMP_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_problem() -> Value {
    json!({
        "horizon": 3, "state_dim": 1, "control_dim": 1,
        "dynamics": {"type": "linear", "a": [[1.0]], "b": [[1.0]]},
        "stage_cost": {"type": "quadratic", "q": [[2.0]], "r": [[2.0]]},
        "terminal_cost": {"type": "quadratic", "q": [[2.0]]},
        "state_sets": {"type": "whole", "dim": 1},
        "control_sets": {"type": "box", "lower": [-1.0], "upper": [1.0]},
        "rate_bounds": 0.5,
        "initial_state": {"mode": "fixed", "x0": [1.0]}
    })
}

fn write_problem(dir: &Path, doc: &Value) -> String {
    let path = dir.join("problem.json");
    fs::write(&path, doc.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn paper_example_writes_outputs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratepmp(&["paper-example", "--out", "run"], dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("x0: (2, 2, 1)"));
    for name in ["states.csv", "controls.csv", "rates.csv", "report.json", "summary.txt"] {
        assert!(dir.path().join("run").join(name).is_file(), "{name}");
    }
}

#[test]
fn negative_initial_state_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratepmp(&["paper-example", "--x0", "-1,0.5,2"], dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("x0: (-1, 0.5, 2)"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &small_problem());
    for run in ["a", "b"] {
        assert_eq!(code(&ratepmp(&["naive-clip", &problem, "--out", run], dir.path())), 0);
    }
    for name in ["states.csv", "controls.csv", "rates.csv", "naive_controls.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn solve_then_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &small_problem());
    assert_eq!(code(&ratepmp(&["solve", &problem, "--out", "s"], dir.path())), 0);
    let verify = ratepmp(&["verify", &problem, "s/trajectory.json", "s/certificate.json"], dir.path());
    assert_eq!(code(&verify), 0, "{}", stdout(&verify));
    assert!(stdout(&verify).contains("verdict: pass"));
}

#[test]
fn tampered_certificate_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &small_problem());
    assert_eq!(code(&ratepmp(&["solve", &problem, "--out", "s"], dir.path())), 0);
    let path = dir.path().join("s/certificate.json");
    let mut cert: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let entry = &mut cert["eta_f"][2][0];
    *entry = json!(entry.as_f64().unwrap() + 0.5);
    fs::write(&path, cert.to_string()).unwrap();
    let verify = ratepmp(&["verify", &problem, "s/trajectory.json", "s/certificate.json"], dir.path());
    assert_eq!(code(&verify), 2);
}

#[test]
fn oracle_and_lift_check_pass_on_a_small_problem() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &small_problem());
    let oracle = ratepmp(&["oracle", &problem, "--grid", "0.01"], dir.path());
    assert_eq!(code(&oracle), 0, "{}", stdout(&oracle));
    assert!(stdout(&oracle).contains("grid optimum"));
    let lift = ratepmp(&["lift-check", &problem], dir.path());
    assert_eq!(code(&lift), 0, "{}", stdout(&lift));
}

#[test]
fn rate_first_clipping_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let problem = write_problem(dir.path(), &small_problem());
    let out = ratepmp(&["naive-clip", &problem, "--rate-first"], dir.path());
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("RateFirst"));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ratepmp(&["solve", "absent.json"], dir.path());
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.json"));

    let mut doc = small_problem();
    doc["rate_bounds"] = json!([0.5]);
    let problem = write_problem(dir.path(), &doc);
    let bad = ratepmp(&["solve", &problem], dir.path());
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("rate_bounds"));

    assert_eq!(code(&ratepmp(&["no-such-command"], dir.path())), 1);
}

#[test]
fn infeasible_problem_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = small_problem();
    doc["state_sets"] = json!({"type": "box", "lower": [5.0], "upper": [6.0]});
    doc["initial_state"] = json!({"mode": "fixed", "x0": [5.0]});
    doc["control_sets"] = json!({"type": "box", "lower": [-3.0], "upper": [-2.0]});
    let problem = write_problem(dir.path(), &doc);
    assert_eq!(code(&ratepmp(&["solve", &problem], dir.path())), 2);
}
