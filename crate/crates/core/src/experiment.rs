//! The three-state rotation benchmark: rate-aware design versus an
//! unconstrained design passed through a magnitude and slew limiter.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificate::{check_certificate, exact_max_check, recover_multipliers, PmpCertificate, ResidualReport};
use crate::cost::{QuadraticCost, QuadraticTerminal, StageCost, TerminalCost};
use crate::error::{Error, Result};
use crate::existence::{check_existence, ExistenceReport};
use crate::ocp::{constraint_violation, rollout, rotation_integrator, total_cost, ConstraintViolation, InitialState, OcpSpec, StationaryData, Trajectory, FEAS_TOL};
use crate::qp::{solve_ocp, QpSettings, QpSolution, QpStatus};
use crate::sets::{ConvexSet, NormKind};

pub const HORIZON: usize = 30;
pub const CONTROL_BOUND: f64 = 1.0;
pub const RATE_BOUND: f64 = 0.75;
/// Default initial state; the benchmark itself leaves it open.
pub const DEFAULT_X0: [f64; 3] = [2.0, 2.0, 1.0];
/// `|Δu|` at least this close to the bound counts as hitting it.
pub const ACTIVITY_TOL: f64 = 1e-3;
pub const EXACT_MAX_SAMPLES: usize = 1000;
pub const EXACT_MAX_TOL: f64 = 1e-4;
/// Allowed amount by which the clipped cost may undercut the design.
pub const COST_ORDER_TOL: f64 = 1e-8;

/// Benchmark problem with rotation angle π/4.
pub fn paper_problem(x0: &DVector<f64>) -> Result<OcpSpec> {
    paper_problem_with_angle(x0, FRAC_PI_4)
}

/// Stage cost `½(‖x‖² + 0.5u²)`, terminal cost `‖x(T)‖²`, states in
/// `[−8, 8] × [−8, 8] × [−0.2, 8]`, `|u| ≤ 1`, `|Δu| ≤ 0.75`, fixed `x0`.
pub fn paper_problem_with_angle(x0: &DVector<f64>, angle: f64) -> Result<OcpSpec> {
    if x0.len() != 3 {
        return Err(Error::dim("x0", 3, x0.len()));
    }
    OcpSpec::time_invariant(
        HORIZON,
        StationaryData {
            dynamics: rotation_integrator(angle),
            stage_cost: StageCost::Quadratic(QuadraticCost::new(
                DMatrix::identity(3, 3),
                DMatrix::from_element(1, 1, 0.5),
            )),
            terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::identity(3, 3) * 2.0)),
            state_set: ConvexSet::from_bounds(&[-8.0, -8.0, -0.2], &[8.0, 8.0, 8.0])?,
            control_set: ConvexSet::uniform_box(1, -CONTROL_BOUND, CONTROL_BOUND)?,
            rate_bound: RATE_BOUND,
            rate_norm: NormKind::Inf,
            initial: InitialState::Fixed(x0.clone()),
        },
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipOrder {
    /// Magnitude clamp, then slew clamp around the previous output.
    #[default]
    MagnitudeFirst,
    RateFirst,
}

/// Sequential actuator model: every output lies in `u_set` and within
/// `rate` (componentwise) of the previous output, starting from `u_prev_init`.
pub fn naive_clip(
    u_raw: &[DVector<f64>],
    u_set: &ConvexSet,
    rate: f64,
    u_prev_init: &DVector<f64>,
    order: ClipOrder,
) -> Result<Vec<DVector<f64>>> {
    let ConvexSet::Box { lower, upper } = u_set else {
        return Err(Error::Unsupported("naive clipping needs a box control set".into()));
    };
    if u_prev_init.len() != lower.len() {
        return Err(Error::dim("u_prev_init", lower.len(), u_prev_init.len()));
    }
    let mut prev = u_prev_init.clone();
    let mut out = Vec::with_capacity(u_raw.len());
    for (t, raw) in u_raw.iter().enumerate() {
        if raw.len() != lower.len() {
            return Err(Error::dim(format!("u_raw[{t}]"), lower.len(), raw.len()));
        }
        let next = DVector::from_fn(raw.len(), |i, _| {
            let magnitude = |v: f64| v.clamp(lower[i], upper[i]);
            let slew = |v: f64| exact_slew(v, prev[i], rate);
            match order {
                ClipOrder::MagnitudeFirst => slew(magnitude(raw[i])),
                ClipOrder::RateFirst => magnitude(slew(raw[i])),
            }
        });
        prev = next.clone();
        out.push(next);
    }
    Ok(out)
}

/// Clamp `v` to `[prev − rate, prev + rate]` so that `|v − prev| ≤ rate`
/// holds in floating point, not only in exact arithmetic.
fn exact_slew(v: f64, prev: f64, rate: f64) -> f64 {
    let mut out = v.clamp(prev - rate, prev + rate);
    while (out - prev).abs() > rate {
        out = if out > prev { out.next_down() } else { out.next_up() };
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
}

impl From<&QpSolution> for SolverSummary {
    fn from(s: &QpSolution) -> Self {
        SolverSummary {
            status: s.status,
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            objective: s.objective,
            polished: s.polished,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    #[serde(with = "crate::io::dvector")]
    pub x0: DVector<f64>,
    pub designed: Trajectory,
    pub designed_cost: f64,
    /// `|u(t+1) − u(t)|` componentwise, recomputed from `designed.u`.
    pub designed_rates: Vec<Vec<f64>>,
    /// Per step: some component of `u(t)` within [`FEAS_TOL`] of its bound.
    pub control_active: Vec<bool>,
    /// Per step k: `|Δu(k)|` within [`ACTIVITY_TOL`] of `R_k`.
    pub rate_active: Vec<bool>,
    pub designed_violation: ConstraintViolation,
    pub solver: SolverSummary,
    pub certificate: Option<PmpCertificate>,
    pub report: Option<ResidualReport>,
    pub exact_max_gap: Option<f64>,
    pub existence: ExistenceReport,
    pub naive: Option<NaiveRecord>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveRecord {
    pub order: ClipOrder,
    pub unconstrained: Trajectory,
    pub unconstrained_cost: f64,
    pub clipped: Trajectory,
    pub clipped_cost: f64,
    pub clipped_rates: Vec<Vec<f64>>,
    /// Constraint violation of the clipped rollout; controls and rates hold
    /// by construction, the states are not protected.
    pub clipped_violation: ConstraintViolation,
}

impl ExperimentRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rate_table(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.rate_magnitudes().iter().map(|r| r.iter().copied().collect()).collect()
}

/// Options of the benchmark runs.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub settings: QpSettings,
    pub seed: u64,
    pub certify: bool,
    pub order: ClipOrder,
    pub u_prev_init: Option<DVector<f64>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            settings: QpSettings::default(),
            seed: 0,
            certify: true,
            order: ClipOrder::default(),
            u_prev_init: None,
        }
    }
}

/// Solve, certify and record the rate-aware design of `spec`.
pub fn run_design(name: &str, spec: &OcpSpec, opts: &RunOptions) -> Result<ExperimentRecord> {
    let x0 = spec
        .fixed_x0()
        .cloned()
        .unwrap_or_else(|| DVector::zeros(spec.state_dim));
    let (traj, sol, rq) = solve_ocp(spec, &opts.settings)?;
    let designed_cost = total_cost(spec, &traj)?;
    let violation = constraint_violation(spec, &traj)?;
    let rates = traj.rate_magnitudes();
    let control_active = traj
        .u
        .iter()
        .zip(&spec.control_sets)
        .map(|(u, set)| match set.bounding_box() {
            Some((lo, hi)) => (0..u.len()).any(|i| u[i] - lo[i] <= FEAS_TOL || hi[i] - u[i] <= FEAS_TOL),
            None => false,
        })
        .collect();
    let rate_active: Vec<bool> = rates
        .iter()
        .enumerate()
        .map(|(k, r)| spec.rate_bounds[k].is_finite() && r.amax() >= spec.rate_bounds[k] - ACTIVITY_TOL)
        .collect();

    let mut checks = vec![Check::new(
        "constraints",
        violation.max() <= FEAS_TOL,
        format!("max violation {:.3e} (tolerance {FEAS_TOL:.0e})", violation.max()),
    )];
    checks.push(Check::new(
        "rate-activity",
        rate_active.iter().any(|&a| a),
        format!(
            "rate bound hit at {} of {} steps",
            rate_active.iter().filter(|&&a| a).count(),
            rate_active.len()
        ),
    ));

    let (certificate, report, exact_max_gap) = if opts.certify {
        let cert = recover_multipliers(&rq, &sol)?;
        let report = check_certificate(spec, &traj, &cert)?;
        checks.push(Check::new(
            "certificate",
            report.pass,
            format!(
                "state_dyn {:.2e}, adjoint {:.2e}, chain {:.2e}, transversality {:.2e}, hmax {:.2e}",
                report.r_state_dyn, report.r_adjoint, report.r_chain, report.r_transversality, report.r_hmax
            ),
        ));
        let gap = exact_max_check(spec, &traj, &cert, EXACT_MAX_SAMPLES, opts.seed).ok();
        if let Some(g) = gap {
            checks.push(Check::new(
                "exact-maximization",
                g <= EXACT_MAX_TOL,
                format!("largest sampled Hamiltonian gap {g:.3e} ({EXACT_MAX_SAMPLES} samples per step)"),
            ));
        }
        (Some(cert), Some(report), gap)
    } else {
        (None, None, None)
    };

    Ok(ExperimentRecord {
        name: name.to_string(),
        x0,
        designed_rates: rate_table(&traj),
        designed: traj,
        designed_cost,
        control_active,
        rate_active,
        designed_violation: violation,
        solver: SolverSummary::from(&sol),
        certificate,
        report,
        exact_max_gap,
        existence: check_existence(spec),
        naive: None,
        checks,
    })
}

pub fn run_paper_example(x0: &DVector<f64>, opts: &RunOptions) -> Result<ExperimentRecord> {
    run_design("paper-example", &paper_problem(x0)?, opts)
}

/// `spec` with control sets and rate bounds removed.
pub fn relax_controls(spec: &OcpSpec) -> OcpSpec {
    OcpSpec {
        control_sets: vec![ConvexSet::whole(spec.control_dim); spec.horizon],
        rate_bounds: vec![f64::INFINITY; spec.horizon - 1],
        ..spec.clone()
    }
}

/// Rate-aware design of `spec` against the unconstrained design clipped by
/// [`naive_clip`] with `U(0)` and `R_0`.
pub fn run_naive_on(name: &str, spec: &OcpSpec, opts: &RunOptions) -> Result<ExperimentRecord> {
    let x0 = spec
        .fixed_x0()
        .ok_or_else(|| Error::Unsupported("the clipping experiment needs a fixed initial state".into()))?
        .clone();
    let mut record = run_design(name, spec, opts)?;
    let relaxed = relax_controls(spec);
    let (unconstrained, _, _) = solve_ocp(&relaxed, &opts.settings)?;
    let unconstrained_cost = total_cost(&relaxed, &unconstrained)?;
    let u_prev = opts
        .u_prev_init
        .clone()
        .unwrap_or_else(|| DVector::zeros(spec.control_dim));
    let rate = spec.rate_bounds[0];
    let clipped_u = naive_clip(&unconstrained.u, &spec.control_sets[0], rate, &u_prev, opts.order)?;
    let clipped = rollout(spec, &x0, &clipped_u)?;
    let clipped_cost = total_cost(spec, &clipped)?;
    let clipped_violation = constraint_violation(spec, &clipped)?;

    let (lo, hi) = spec.control_sets[0].bounding_box().expect("box control set");
    let mut prev = u_prev.clone();
    let mut bounds_exact = true;
    for u in &clipped_u {
        for i in 0..u.len() {
            bounds_exact &= lo[i] <= u[i] && u[i] <= hi[i] && (u[i] - prev[i]).abs() <= rate;
        }
        prev = u.clone();
    }
    record.checks.push(Check::new(
        "clipped-bounds",
        bounds_exact,
        "clipped controls within magnitude and rate bounds without tolerance".into(),
    ));
    record.checks.push(Check::new(
        "cost-ordering",
        clipped_cost >= record.designed_cost - COST_ORDER_TOL,
        format!(
            "clipped cost {clipped_cost:.6e} vs designed {:.6e}; clipped state violation {:.3e}",
            record.designed_cost, clipped_violation.state
        ),
    ));
    record.naive = Some(NaiveRecord {
        order: opts.order,
        unconstrained,
        unconstrained_cost,
        clipped_rates: rate_table(&clipped),
        clipped,
        clipped_cost,
        clipped_violation,
    });
    Ok(record)
}

pub fn run_naive_experiment(x0: &DVector<f64>, opts: &RunOptions) -> Result<ExperimentRecord> {
    run_naive_on("naive-clip", &paper_problem(x0)?, opts)
}
