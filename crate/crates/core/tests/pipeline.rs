//! Solver, multiplier recovery and certificate checks on whole problems.

use nalgebra::{DMatrix, DVector};

use ratepmp::experiment::{
    paper_problem, relax_controls, run_naive_on, run_paper_example, RunOptions, DEFAULT_X0,
};
use ratepmp::lifting::{lift_trajectory, lifted_cost_equivalence};
use ratepmp::ocp::{rotation_integrator, StationaryData};
use ratepmp::qp::oracle::brute_force_oracle;
use ratepmp::qp::transcribe::{transcribe, RowTag};
use ratepmp::{
    check_certificate, exact_max_check, recover_multipliers, rollout, solve, solve_ocp, total_cost, ConvexSet,
    InitialState, NormKind, OcpSpec, PmpCertificate, QpProblem, QpSettings, QpStatus, QuadraticCost,
    QuadraticTerminal, StageCost, StageDynamics, TerminalCost, Trajectory,
};

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn benchmark() -> OcpSpec {
    paper_problem(&v(&DEFAULT_X0)).unwrap()
}

fn scalar(x0: f64, control_set: ConvexSet, rate: f64, weights: (f64, f64, f64)) -> (OcpSpec, usize) {
    let horizon = 4;
    let (q, r, qf) = weights;
    let spec = OcpSpec::time_invariant(
        horizon,
        StationaryData {
            dynamics: StageDynamics::linear(DMatrix::from_element(1, 1, 1.1), DMatrix::from_element(1, 1, 0.5)),
            stage_cost: StageCost::Quadratic(QuadraticCost::new(
                DMatrix::from_element(1, 1, q),
                DMatrix::from_element(1, 1, r),
            )),
            terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::from_element(1, 1, qf))),
            state_set: ConvexSet::whole(1),
            control_set,
            rate_bound: rate,
            rate_norm: NormKind::Inf,
            initial: InitialState::Fixed(v(&[x0])),
        },
    )
    .unwrap();
    (spec, horizon)
}

#[test]
fn benchmark_optimum_respects_bounds_and_matches_qp_objective() {
    let spec = benchmark();
    let (traj, sol, _) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    for u in &traj.u {
        assert!(u[0].abs() <= 1.0 + 1e-6);
    }
    for r in traj.rate_magnitudes() {
        assert!(r[0] <= 0.75 + 1e-6);
    }
    assert!(traj.rate_magnitudes().iter().any(|r| r[0] >= 0.75 - 1e-3));
    assert!((total_cost(&spec, &traj).unwrap() - sol.objective).abs() <= 1e-8);

    let ext = lift_trajectory(&spec, &traj).unwrap();
    for k in 0..spec.horizon - 1 {
        assert!(ext.y[k][k + 2].amax() <= 0.75 + 1e-6);
    }
    let (a, b) = lifted_cost_equivalence(&spec, &traj).unwrap();
    assert_eq!(a, b);
}

#[test]
fn two_step_problem_has_one_rate_row() {
    let spec = OcpSpec::time_invariant(
        2,
        StationaryData {
            dynamics: StageDynamics::linear(DMatrix::identity(1, 1), DMatrix::identity(1, 1)),
            stage_cost: StageCost::Quadratic(QuadraticCost::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1))),
            terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::identity(1, 1))),
            state_set: ConvexSet::whole(1),
            control_set: ConvexSet::whole(1),
            rate_bound: 3.0,
            rate_norm: NormKind::Inf,
            initial: InitialState::Fixed(v(&[1.0])),
        },
    )
    .unwrap();
    let rq = transcribe(&spec).unwrap();
    assert_eq!(rq.count(|r| matches!(r, RowTag::Rate { .. })), 1);
}

#[test]
fn qp_without_constraints_returns_origin() {
    let qp = QpProblem::new(
        DMatrix::identity(3, 3),
        DVector::zeros(3),
        DMatrix::zeros(0, 3),
        DVector::zeros(0),
        DVector::zeros(0),
    )
    .unwrap();
    let sol = solve(&qp, &QpSettings::default()).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!(sol.z.amax() < 1e-9);
    assert_eq!(sol.dual.len(), 0);
}

#[test]
fn linear_objective_on_interval_sits_at_lower_bound() {
    let qp = QpProblem::new(
        DMatrix::zeros(1, 1),
        v(&[1.0]),
        DMatrix::identity(1, 1),
        v(&[0.0]),
        v(&[1.0]),
    )
    .unwrap();
    let sol = solve(&qp, &QpSettings::default()).unwrap();
    assert_eq!(sol.status, QpStatus::Optimal);
    assert!(sol.z[0].abs() < 1e-7);
    // q + y = 0; the lower bound carries the negative sign
    assert!((sol.dual[0] + 1.0).abs() < 1e-7);
}

#[test]
fn origin_start_keeps_controls_at_zero() {
    let rec = run_paper_example(&v(&[0.0, 0.0, 0.0]), &RunOptions::default()).unwrap();
    assert!(rec.designed.u.iter().all(|u| u[0].abs() < 1e-9));
    assert!(rec.designed_cost.abs() < 1e-12);
}

#[test]
fn oracle_brackets_the_qp_on_the_integrator() {
    let spec = OcpSpec::time_invariant(
        2,
        StationaryData {
            dynamics: StageDynamics::linear(DMatrix::identity(1, 1), DMatrix::identity(1, 1)),
            // ½·2 = 1 gives the unit weights x² + u²
            stage_cost: StageCost::Quadratic(QuadraticCost::new(
                DMatrix::from_element(1, 1, 2.0),
                DMatrix::from_element(1, 1, 2.0),
            )),
            terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::from_element(1, 1, 2.0))),
            state_set: ConvexSet::whole(1),
            control_set: ConvexSet::uniform_box(1, -1.0, 1.0).unwrap(),
            rate_bound: 2.0,
            rate_norm: NormKind::Inf,
            initial: InitialState::Fixed(v(&[1.0])),
        },
    )
    .unwrap();
    let (traj, _, _) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let qp_cost = total_cost(&spec, &traj).unwrap();
    let (_, grid_cost) = brute_force_oracle(&spec, 0.01).unwrap();
    assert!(grid_cost >= qp_cost - 1e-4);
    // |∂J/∂u| ≤ 8 on the box, so a half-step error costs at most 8 · 0.005 per control
    assert!(grid_cost <= qp_cost + 2.0 * 8.0 * 0.005);
}

#[test]
fn benchmark_certificate_passes() {
    let spec = benchmark();
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    let report = check_certificate(&spec, &traj, &cert).unwrap();
    assert!(report.pass, "{report}");
}

#[test]
fn certificate_residuals_scale_with_the_multipliers() {
    let spec = benchmark();
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    let base = check_certificate(&spec, &traj, &cert).unwrap();
    for lambda in [0.5, 2.0] {
        let scaled = check_certificate(&spec, &traj, &cert.scaled(lambda)).unwrap();
        assert!(scaled.pass, "{scaled}");
        assert_eq!(scaled.r_state_dyn, base.r_state_dyn);
        assert!((scaled.r_adjoint - lambda * base.r_adjoint).abs() <= 1e-12);
        assert!((scaled.r_nontriv - lambda * base.r_nontriv).abs() <= 1e-12);
    }
}

#[test]
fn infeasible_trajectory_reports_state_defect_with_its_step() {
    let spec = benchmark();
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    let mut broken = traj.clone();
    broken.x[7][1] += 0.3;
    let report = check_certificate(&spec, &broken, &cert).unwrap();
    assert!(report.r_state_dyn > 0.1);
    assert!(report.r_state_dyn_t == 6 || report.r_state_dyn_t == 7);
    assert!(!report.pass);
}

/// Unconstrained scalar LQ solved by the Riccati recursion, with adjoints from
/// the backward recursion `η_f(t−1) = a η_f(t) − q x(t)`, `η_f(T−1) = −q_F x(T)`.
#[test]
fn hand_lqr_multipliers_pass() {
    let (a, b, q, r, qf) = (1.1, 0.5, 1.0, 0.4, 2.0);
    let (spec, horizon) = scalar(1.5, ConvexSet::whole(1), f64::INFINITY, (q, r, qf));
    let mut p = qf;
    let mut gains = vec![0.0; horizon];
    for t in (0..horizon).rev() {
        let k = b * p * a / (r + b * b * p);
        gains[t] = k;
        p = q + a * a * p - a * b * p * k;
    }
    let mut x = vec![1.5];
    let mut u = Vec::new();
    for t in 0..horizon {
        u.push(-gains[t] * x[t]);
        x.push(a * x[t] + b * u[t]);
    }
    let traj = Trajectory {
        x: x.iter().map(|&s| v(&[s])).collect(),
        u: u.iter().map(|&s| v(&[s])).collect(),
    };
    let mut cert = PmpCertificate::zeros(&spec);
    cert.psi0 = 1.0;
    let mut eta = -qf * x[horizon];
    for t in (0..horizon).rev() {
        cert.eta_f[t + 1] = v(&[eta]);
        // stationarity in u holds by the Riccati gain
        assert!((b * eta - r * u[t]).abs() < 1e-12);
        eta = a * eta - q * x[t];
    }
    // the fixed initial state absorbs the remaining adjoint through η_x(0)
    cert.eta_x[0] = v(&[-eta]);
    let report = check_certificate(&spec, &traj, &cert).unwrap();
    assert!(report.pass, "{report}");
    assert!(report.r_adjoint < 1e-12);
    assert!(report.r_hmax < 1e-12);
}

#[test]
fn inactive_rate_rows_give_zero_rate_multipliers() {
    let (spec, _) = scalar(1.5, ConvexSet::uniform_box(1, -2.0, 2.0).unwrap(), 50.0, (1.0, 0.4, 2.0));
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    for chain in cert.eta_g.iter().chain(&cert.eta_y) {
        assert!(chain.iter().all(|e| e.amax() < 1e-9));
    }
    assert!(check_certificate(&spec, &traj, &cert).unwrap().pass);
}

#[test]
fn interior_concave_hamiltonian_has_no_gap() {
    let (spec, _) = scalar(1.5, ConvexSet::uniform_box(1, -5.0, 5.0).unwrap(), 50.0, (1.0, 0.4, 2.0));
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    assert!(traj.u.iter().all(|u| u[0].abs() < 4.0));
    let cert = recover_multipliers(&rq, &sol).unwrap();
    let gap = exact_max_check(&spec, &traj, &cert, 1000, 1).unwrap();
    assert!(gap <= 1e-9, "{gap}");
}

#[test]
fn perturbed_control_opens_a_hamiltonian_gap() {
    let spec = benchmark();
    let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
    let cert = recover_multipliers(&rq, &sol).unwrap();
    let mut moved = traj.clone();
    // move the largest control 0.1 towards the origin; ½·0.5u² makes H strictly concave
    let t = (0..spec.horizon)
        .max_by(|&i, &j| traj.u[i][0].abs().total_cmp(&traj.u[j][0].abs()))
        .unwrap();
    moved.u[t][0] -= 0.1 * traj.u[t][0].signum();
    let gap = exact_max_check(&spec, &moved, &cert, 1000, 0).unwrap();
    assert!(gap > 1e-3, "{gap}");
}

#[test]
fn loose_bounds_make_clipping_inert() {
    let spec = benchmark();
    let (free, _, _) = solve_ocp(&relax_controls(&spec), &QpSettings::default()).unwrap();
    let peak = free.u.iter().map(|u| u[0].abs()).fold(0.0, f64::max);
    let slew = free.rate_magnitudes().iter().map(|r| r[0]).fold(0.0, f64::max);
    let mut loose = spec.clone();
    loose.control_sets = vec![ConvexSet::uniform_box(1, -2.0 * peak, 2.0 * peak).unwrap(); spec.horizon];
    // the first clipped step is measured from rest
    let first = free.u[0][0].abs();
    loose.rate_bounds = vec![2.0 * slew.max(first); spec.horizon - 1];
    let rec = run_naive_on("loose", &loose, &RunOptions::default()).unwrap();
    let naive = rec.naive.as_ref().unwrap();
    for (a, b) in naive.clipped.u.iter().zip(&rec.designed.u) {
        assert!((a - b).amax() <= 1e-6);
    }
    for (a, b) in naive.clipped.x.iter().zip(&rec.designed.x) {
        assert!((a - b).amax() <= 1e-6);
    }
}

#[test]
fn certificate_survives_other_rotations() {
    for angle in [0.3, 1.2, 2.5] {
        let mut spec = benchmark();
        spec.dynamics = vec![rotation_integrator(angle); spec.horizon];
        let (traj, sol, rq) = solve_ocp(&spec, &QpSettings::default()).unwrap();
        let cert = recover_multipliers(&rq, &sol).unwrap();
        let report = check_certificate(&spec, &traj, &cert).unwrap();
        assert!(report.pass, "angle {angle}: {report}");
        let x0 = spec.fixed_x0().unwrap().clone();
        let again = rollout(&spec, &x0, &traj.u).unwrap();
        assert!(again.x.iter().zip(&traj.x).all(|(a, b)| (a - b).amax() < 1e-9));
    }
}
