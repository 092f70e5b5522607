use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{chain_residual, hamiltonian, hamiltonian_grad_u, hamiltonian_grad_x, PmpCertificate};
use crate::error::{Error, Result};
use crate::lifting::{lift_trajectory, LiftedProblem, YSetReading};
use crate::ocp::{OcpSpec, Trajectory, FEAS_TOL};
use crate::sets::ConvexSet;

/// Pass threshold for every residual.
pub const CERT_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Direction cones replacing the supporting cone of `U(t)`; evaluated at
    /// the origin.
    pub tents: Option<Vec<ConvexSet>>,
    pub reading: YSetReading,
    /// Bounds within this distance count as active.
    pub feas_tol: f64,
    pub eps: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tents: None,
            reading: YSetReading::default(),
            feas_tol: FEAS_TOL,
            eps: CERT_TOL,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransversalityBreakdown {
    /// `‖η_f(−1)‖`.
    pub eta_f_initial: f64,
    /// `‖∂H/∂x(0) + η_x(0)‖`.
    pub initial_stationarity: f64,
    /// `‖η_f(T−1) − η_x(T) + ψ₀∇c_F(x(T))‖`.
    pub terminal_adjoint: f64,
    /// Largest sign violation of `η_x(t)` against `M(t)`.
    pub sign_eta_x: f64,
    /// Largest sign violation of `η_y^k(t)` against `Y_t^k`.
    pub sign_eta_y: f64,
    /// `‖η_x(T) − η_x(T−1)‖`, informational.
    pub literal_terminal: f64,
    /// `|H(T)|` with `η_f(T) := η_x(T)`, `u(T) := u(T−1)` and the stage-(T−1)
    /// maps; convention-dependent, informational.
    pub hamiltonian_terminal: f64,
}

impl TransversalityBreakdown {
    /// The parts that enter the verdict.
    pub fn checked_max(&self) -> f64 {
        self.eta_f_initial
            .max(self.initial_stationarity)
            .max(self.terminal_adjoint)
            .max(self.sign_eta_x)
            .max(self.sign_eta_y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResiduals {
    pub t: usize,
    pub state_dyn: f64,
    pub adjoint: f64,
    pub hmax: f64,
    pub hamiltonian: f64,
    pub sign_eta_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub r_state_dyn: f64,
    pub r_state_dyn_t: usize,
    pub r_adjoint: f64,
    pub r_adjoint_t: usize,
    pub r_chain: f64,
    pub r_transversality: f64,
    pub transversality: TransversalityBreakdown,
    pub r_hmax: f64,
    pub r_hmax_t: usize,
    pub r_nontriv: f64,
    pub r_sign: f64,
    /// Largest distance of the trajectory from its constraint sets.
    pub r_feasibility: f64,
    pub steps: Vec<StepResiduals>,
    pub notes: Vec<String>,
    pub tolerance: f64,
    pub pass: bool,
}

impl ResidualReport {
    fn verdict_fields(&self) -> [(&'static str, f64); 8] {
        [
            ("r_state_dyn", self.r_state_dyn),
            ("r_adjoint", self.r_adjoint),
            ("r_chain", self.r_chain),
            ("r_transversality", self.r_transversality),
            ("r_hmax", self.r_hmax),
            ("r_nontriv", self.r_nontriv),
            ("r_sign", self.r_sign),
            ("r_feasibility", self.r_feasibility),
        ]
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values
        .enumerate()
        .fold((0.0, 0), |(best, at), (i, v)| if v > best { (v, i) } else { (best, at) })
}

/// Sign residual of a constraint multiplier, or the set violation when the
/// point lies outside the set.
fn sign_residual(set: &ConvexSet, p: &DVector<f64>, eta: &DVector<f64>, tol: f64) -> (f64, f64) {
    match set.normal_cone_residual_tol(p, &(-eta), tol) {
        Ok(r) => (r, 0.0),
        Err(Error::NotInSet { violation }) => (0.0, violation),
        Err(_) => (f64::INFINITY, 0.0),
    }
}

pub fn check_certificate(spec: &OcpSpec, traj: &Trajectory, cert: &PmpCertificate) -> Result<ResidualReport> {
    check_certificate_with(spec, traj, cert, &CheckOptions::default())
}

pub fn check_certificate_with(
    spec: &OcpSpec,
    traj: &Trajectory,
    cert: &PmpCertificate,
    opts: &CheckOptions,
) -> Result<ResidualReport> {
    spec.validate()?;
    traj.check_shape(spec)?;
    cert.check_shape(spec)?;
    if let Some(tents) = &opts.tents {
        if tents.len() != spec.horizon {
            return Err(Error::dim("tents", spec.horizon, tents.len()));
        }
    }
    let horizon = spec.horizon;
    let psi0 = cert.psi0;
    let mut notes = Vec::new();
    let mut feasibility = 0.0f64;

    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let (x, u) = (&traj.x[t], &traj.u[t]);
        let eta_f = cert.eta_f_at(t as isize);
        let (lp, lc) = cert.lambda_terms(t);
        let state_dyn = (&traj.x[t + 1] - spec.dynamics[t].eval(t, x, u)).norm();
        let hx = hamiltonian_grad_x(spec, t, psi0, eta_f, x, u);
        let adjoint = (cert.eta_f_at(t as isize - 1) - &hx - &cert.eta_x[t]).norm();
        let hu = hamiltonian_grad_u(spec, t, psi0, eta_f, &lp, &lc, x, u);
        let hmax = match &opts.tents {
            Some(tents) => tents[t].normal_cone_residual(&DVector::zeros(spec.control_dim), &hu)?,
            None => match spec.control_sets[t].normal_cone_residual_tol(u, &hu, opts.feas_tol) {
                Ok(r) => r,
                Err(Error::NotInSet { violation }) => {
                    feasibility = feasibility.max(violation);
                    0.0
                }
                Err(e) => return Err(e),
            },
        };
        let state_set = if t == 0 { spec.initial_set() } else { spec.state_sets[t].clone() };
        let (sign_eta_x, viol) = sign_residual(&state_set, x, &cert.eta_x[t], opts.feas_tol);
        feasibility = feasibility.max(viol);
        steps.push(StepResiduals {
            t,
            state_dyn,
            adjoint,
            hmax,
            hamiltonian: hamiltonian(spec, t, psi0, eta_f, &lp, &lc, x, u),
            sign_eta_x,
        });
    }

    let x_final = &traj.x[horizon];
    let (sign_final, viol) = sign_residual(&spec.state_sets[horizon], x_final, &cert.eta_x[horizon], opts.feas_tol);
    feasibility = feasibility.max(viol);

    let lifted = LiftedProblem::new(spec.clone(), opts.reading);
    let ext = lift_trajectory(spec, traj)?;
    let mut sign_eta_y = 0.0f64;
    for (k, chain) in ext.y.iter().enumerate() {
        for (t, y) in chain.iter().enumerate() {
            let (r, viol) = sign_residual(&lifted.y_set(k, t), y, &cert.eta_y[k][t], opts.feas_tol);
            sign_eta_y = sign_eta_y.max(r);
            feasibility = feasibility.max(viol);
        }
    }

    let grad_final = spec.terminal_cost.grad(x_final);
    let x0 = &traj.x[0];
    let u_last = &traj.u[horizon - 1];
    let zero = DVector::zeros(spec.control_dim);
    let transversality = TransversalityBreakdown {
        eta_f_initial: cert.eta_f_at(-1).norm(),
        initial_stationarity: (hamiltonian_grad_x(spec, 0, psi0, cert.eta_f_at(0), x0, &traj.u[0]) + &cert.eta_x[0]).norm(),
        terminal_adjoint: (cert.eta_f_at(horizon as isize - 1) - &cert.eta_x[horizon] + grad_final * psi0).norm(),
        sign_eta_x: steps.iter().map(|s| s.sign_eta_x).fold(sign_final, f64::max),
        sign_eta_y,
        literal_terminal: (&cert.eta_x[horizon] - &cert.eta_x[horizon - 1]).norm(),
        hamiltonian_terminal: hamiltonian(spec, horizon - 1, psi0, &cert.eta_x[horizon], &zero, &zero, x_final, u_last).abs(),
    };

    for (t, set) in spec.control_sets.iter().enumerate() {
        if set.is_degenerate() {
            notes.push(format!("U({t}) has empty interior; the relative-interior hypothesis is assumed"));
        }
    }
    notes.push("terminal line uses the adjoint step eta_f(T-1) = eta_x(T) - psi0 grad c_F(x(T))".into());
    notes.push("literal |eta_x(T) - eta_x(T-1)| and H(T) are informational only".into());

    let (r_state_dyn, r_state_dyn_t) = argmax(steps.iter().map(|s| s.state_dyn));
    let (r_adjoint, r_adjoint_t) = argmax(steps.iter().map(|s| s.adjoint));
    let (r_hmax, r_hmax_t) = argmax(steps.iter().map(|s| s.hmax));
    let nontrivial = psi0 > 0.0 || cert.eta_f.iter().any(|e| e.amax() > 0.0);
    let mut report = ResidualReport {
        r_state_dyn,
        r_state_dyn_t,
        r_adjoint,
        r_adjoint_t,
        r_chain: chain_residual(cert),
        r_transversality: transversality.checked_max(),
        transversality,
        r_hmax,
        r_hmax_t,
        r_nontriv: if nontrivial { 0.0 } else { 1.0 },
        r_sign: (-psi0).max(0.0),
        r_feasibility: feasibility,
        steps,
        notes,
        tolerance: opts.eps,
        pass: false,
    };
    report.pass = report.verdict_fields().iter().all(|(_, v)| *v <= opts.eps);
    Ok(report)
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certificate check (tolerance {:.1e})", self.tolerance)?;
        for (name, value) in self.verdict_fields() {
            let mark = if value <= self.tolerance { "ok" } else { "FAIL" };
            let at = match name {
                "r_state_dyn" => format!(" at t = {}", self.r_state_dyn_t),
                "r_adjoint" => format!(" at t = {}", self.r_adjoint_t),
                "r_hmax" => format!(" at t = {}", self.r_hmax_t),
                _ => String::new(),
            };
            writeln!(f, "  {name:<18} {value:>12.3e}  {mark}{at}")?;
        }
        let tr = &self.transversality;
        writeln!(f, "  transversality breakdown")?;
        for (name, value) in [
            ("eta_f(-1)", tr.eta_f_initial),
            ("dH/dx(0) + eta_x(0)", tr.initial_stationarity),
            ("terminal adjoint", tr.terminal_adjoint),
            ("sign eta_x", tr.sign_eta_x),
            ("sign eta_y", tr.sign_eta_y),
        ] {
            writeln!(f, "    {name:<22} {value:>12.3e}")?;
        }
        writeln!(f, "    {:<22} {:>12.3e}  (informational)", "eta_x(T) - eta_x(T-1)", tr.literal_terminal)?;
        writeln!(f, "    {:<22} {:>12.3e}  (informational, convention-dependent)", "H(T)", tr.hamiltonian_terminal)?;
        writeln!(f, "  {:>4} {:>12} {:>12} {:>12} {:>14}", "t", "state_dyn", "adjoint", "hmax", "H")?;
        for s in &self.steps {
            writeln!(f, "  {:>4} {:>12.3e} {:>12.3e} {:>12.3e} {:>14.6e}", s.t, s.state_dyn, s.adjoint, s.hmax, s.hamiltonian)?;
        }
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        writeln!(f, "verdict: {}", if self.pass { "pass" } else { "fail" })
    }
}
