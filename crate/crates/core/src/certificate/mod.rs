//! Maximum-principle certificates for rate-constrained problems.
//!
//! Multipliers are in maximization form: `ψ₀ ≥ 0`, the Hamiltonian
//!
//! ```text
//! H(t) = ⟨η_f(t), f(t, x, u)⟩ + ⟨η_g^{t−1}(t) − η_g^t(t), u⟩ − ψ₀ c(t, x, u)
//! ```
//!
//! (λ entries outside `k = 0..T−2` vanish), the adjoint
//! `η_f(t−1) = ∂H/∂x(t) + η_x(t)` with `η_f(−1) = 0`, and the η_g chains
//!
//! ```text
//! η_g^k(T−1) = η_y^k(T)
//! η_g^k(t−1) = η_y^k(t)               if t = k
//! η_g^k(t−1) = η_g^k(t) + η_y^k(t)    otherwise
//! ```
//!
//! Constraint multipliers satisfy `⟨η, d⟩ ≥ 0` for every feasible direction
//! `d` of their set at the trajectory point.

mod check;
mod exact;
mod recover;

pub use check::{check_certificate, check_certificate_with, CheckOptions, ResidualReport, StepResiduals, TransversalityBreakdown, CERT_TOL};
pub use exact::{exact_max_check, halton};
pub use recover::recover_multipliers;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocp::OcpSpec;

/// Multiplier bundle attached to a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmpCertificate {
    pub psi0: f64,
    /// `η_f(t)` for t = −1..T−1; entry `i` holds `t = i − 1`.
    #[serde(with = "crate::io::vec_list")]
    pub eta_f: Vec<DVector<f64>>,
    /// `η_x(t)` for t = 0..T.
    #[serde(with = "crate::io::vec_list")]
    pub eta_x: Vec<DVector<f64>>,
    /// `η_g^k(t)` for k = 0..T−2, t = −1..T−1; entry `[k][i]` holds `t = i − 1`.
    #[serde(with = "crate::io::nested_vec_list")]
    pub eta_g: Vec<Vec<DVector<f64>>>,
    /// `η_y^k(t)` for k = 0..T−2, t = 0..T.
    #[serde(with = "crate::io::nested_vec_list")]
    pub eta_y: Vec<Vec<DVector<f64>>>,
}

impl PmpCertificate {
    pub fn zeros(spec: &OcpSpec) -> Self {
        let (horizon, d, m) = (spec.horizon, spec.state_dim, spec.control_dim);
        PmpCertificate {
            psi0: 0.0,
            eta_f: vec![DVector::zeros(d); horizon + 1],
            eta_x: vec![DVector::zeros(d); horizon + 1],
            eta_g: vec![vec![DVector::zeros(m); horizon + 1]; horizon - 1],
            eta_y: vec![vec![DVector::zeros(m); horizon + 1]; horizon - 1],
        }
    }

    /// `η_f(t)` for `t ≥ −1`.
    pub fn eta_f_at(&self, t: isize) -> &DVector<f64> {
        &self.eta_f[(t + 1) as usize]
    }

    /// `η_g^k(t)` for `t ≥ −1`.
    pub fn eta_g_at(&self, k: usize, t: isize) -> &DVector<f64> {
        &self.eta_g[k][(t + 1) as usize]
    }

    /// `(η_g^{t−1}(t), η_g^t(t))` with zeros outside `k = 0..T−2`.
    pub fn lambda_terms(&self, t: usize) -> (DVector<f64>, DVector<f64>) {
        let m = self.eta_y.first().map_or(0, |c| c[0].len());
        let chains = self.eta_g.len();
        let prev = if t >= 1 && t - 1 < chains {
            self.eta_g_at(t - 1, t as isize).clone()
        } else {
            DVector::zeros(m)
        };
        let cur = if t < chains {
            self.eta_g_at(t, t as isize).clone()
        } else {
            DVector::zeros(m)
        };
        (prev, cur)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &Vec<DVector<f64>>| v.iter().map(|e| e * factor).collect::<Vec<_>>();
        PmpCertificate {
            psi0: self.psi0 * factor,
            eta_f: scale(&self.eta_f),
            eta_x: scale(&self.eta_x),
            eta_g: self.eta_g.iter().map(scale).collect(),
            eta_y: self.eta_y.iter().map(scale).collect(),
        }
    }

    pub fn check_shape(&self, spec: &OcpSpec) -> Result<()> {
        let (horizon, d, m) = (spec.horizon, spec.state_dim, spec.control_dim);
        let vecs = |name: &str, v: &[DVector<f64>], len: usize, dim: usize| -> Result<()> {
            if v.len() != len {
                return Err(Error::dim(name.to_string(), len, v.len()));
            }
            for (i, e) in v.iter().enumerate() {
                if e.len() != dim {
                    return Err(Error::dim(format!("{name}[{i}]"), dim, e.len()));
                }
            }
            Ok(())
        };
        vecs("eta_f", &self.eta_f, horizon + 1, d)?;
        vecs("eta_x", &self.eta_x, horizon + 1, d)?;
        for (name, chains) in [("eta_g", &self.eta_g), ("eta_y", &self.eta_y)] {
            if chains.len() != horizon - 1 {
                return Err(Error::dim(name, horizon - 1, chains.len()));
            }
            for (k, chain) in chains.iter().enumerate() {
                vecs(&format!("{name}[{k}]"), chain, horizon + 1, m)?;
            }
        }
        Ok(())
    }
}

/// Run the η_g chains backward from the η_y values.
pub fn eta_g_from_eta_y(eta_y: &[Vec<DVector<f64>>], horizon: usize) -> Vec<Vec<DVector<f64>>> {
    eta_y
        .iter()
        .enumerate()
        .map(|(k, ys)| {
            let mut g = vec![DVector::zeros(ys[0].len()); horizon + 1];
            g[horizon] = ys[horizon].clone();
            for t in (0..horizon).rev() {
                // g[t] holds η_g^k(t − 1)
                g[t] = if t == k { ys[t].clone() } else { &g[t + 1] + &ys[t] };
            }
            g
        })
        .collect()
}

/// Largest violation norm of the η_g chain recursions, terminal tie included.
pub fn chain_residual(cert: &PmpCertificate) -> f64 {
    let horizon = cert.eta_f.len() - 1;
    let mut worst = 0.0f64;
    for (k, (g, ys)) in cert.eta_g.iter().zip(&cert.eta_y).enumerate() {
        worst = worst.max((&g[horizon] - &ys[horizon]).norm());
        for t in 0..horizon {
            let expected = if t == k { ys[t].clone() } else { &g[t + 1] + &ys[t] };
            worst = worst.max((&g[t] - expected).norm());
        }
    }
    worst
}

/// `H(t)` at `(x, u)` with `λ_prev = η_g^{t−1}(t)`, `λ_cur = η_g^t(t)`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian(
    spec: &OcpSpec,
    t: usize,
    psi0: f64,
    eta_f: &DVector<f64>,
    lambda_prev: &DVector<f64>,
    lambda_cur: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> f64 {
    eta_f.dot(&spec.dynamics[t].eval(t, x, u)) + (lambda_prev - lambda_cur).dot(u)
        - psi0 * spec.stage_costs[t].value(t, x, u)
}

/// `∂H/∂x(t) = (∂f/∂x)ᵀ η_f − ψ₀ ∇ₓc`.
pub fn hamiltonian_grad_x(
    spec: &OcpSpec,
    t: usize,
    psi0: f64,
    eta_f: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    spec.dynamics[t].jacobian_x(t, x, u).tr_mul(eta_f) - spec.stage_costs[t].grad_x(t, x, u) * psi0
}

/// `∂H/∂u(t) = (∂f/∂u)ᵀ η_f + λ_prev − λ_cur − ψ₀ ∇ᵤc`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_grad_u(
    spec: &OcpSpec,
    t: usize,
    psi0: f64,
    eta_f: &DVector<f64>,
    lambda_prev: &DVector<f64>,
    lambda_cur: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    spec.dynamics[t].jacobian_u(t, x, u).tr_mul(eta_f) + lambda_prev - lambda_cur
        - spec.stage_costs[t].grad_u(t, x, u) * psi0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{QuadraticCost, QuadraticTerminal, StageCost, TerminalCost};
    use crate::derivcheck::{fd_gradient, relative_error};
    use crate::dynamics::StageDynamics;
    use crate::ocp::{InitialState, StationaryData};
    use crate::sets::{ConvexSet, NormKind};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn scalar(q: f64, r: f64) -> OcpSpec {
        OcpSpec::time_invariant(
            3,
            StationaryData {
                dynamics: StageDynamics::linear(DMatrix::identity(1, 1), DMatrix::identity(1, 1)),
                stage_cost: StageCost::Quadratic(QuadraticCost::new(
                    DMatrix::from_element(1, 1, q),
                    DMatrix::from_element(1, 1, r),
                )),
                terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::identity(1, 1))),
                state_set: ConvexSet::whole(1),
                control_set: ConvexSet::uniform_box(1, -1.0, 1.0).unwrap(),
                rate_bound: 1.0,
                rate_norm: NormKind::Inf,
                initial: InitialState::Free,
            },
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        let spec = scalar(1.0, 0.5);
        let z = v(&[0.0]);
        assert_eq!(hamiltonian(&spec, 0, 0.0, &z, &z, &z, &v(&[2.0]), &v(&[1.0])), 0.0);
        // c = ½(x² + ½u²) at x = 2, u = 1
        assert_eq!(hamiltonian(&spec, 0, 1.0, &z, &z, &z, &v(&[2.0]), &v(&[1.0])), -2.25);
        // f = x + u with η_f = 1
        assert_eq!(hamiltonian(&spec, 0, 0.0, &v(&[1.0]), &z, &z, &v(&[2.0]), &v(&[1.0])), 3.0);
    }

    #[test]
    fn lambda_terms_enter_grad_u_exactly() {
        let spec = scalar(0.0, 0.0);
        let z = v(&[0.0]);
        let g = hamiltonian_grad_u(&spec, 1, 0.0, &z, &v(&[0.7]), &v(&[-0.2]), &v(&[3.0]), &v(&[0.4]));
        assert!((g[0] - 0.9).abs() < 1e-15);
        let g0 = hamiltonian_grad_x(&spec, 1, 0.0, &z, &v(&[3.0]), &v(&[0.4]));
        assert_eq!(g0, v(&[0.0]));
    }

    #[test]
    fn grad_x_matches_finite_differences() {
        let spec = scalar(1.3, 0.5);
        let (ef, lp, lc, u) = (v(&[0.8]), v(&[0.1]), v(&[0.3]), v(&[0.25]));
        let x = v(&[-1.2]);
        let fd = fd_gradient(|p| hamiltonian(&spec, 0, 1.0, &ef, &lp, &lc, p, &u), &x);
        let an = hamiltonian_grad_x(&spec, 0, 1.0, &ef, &x, &u);
        assert!(relative_error(&DMatrix::from_column_slice(1, 1, an.as_slice()), &DMatrix::from_column_slice(1, 1, fd.as_slice())) < 1e-6);
    }

    #[test]
    fn chain_of_zeros_and_perturbation() {
        let spec = scalar(1.0, 1.0);
        let mut cert = PmpCertificate::zeros(&spec);
        assert_eq!(chain_residual(&cert), 0.0);
        cert.eta_y[1][2][0] += 0.125;
        assert_eq!(chain_residual(&cert), 0.125);
        cert.eta_g = eta_g_from_eta_y(&cert.eta_y, 3);
        assert_eq!(chain_residual(&cert), 0.0);
    }

    #[test]
    fn chain_support_for_a_single_rate_multiplier() {
        // k = 5 with μ = 0.4 placed at t = k + 2 as −μ
        let horizon = 10;
        let mut eta_y = vec![vec![DVector::zeros(1); horizon + 1]; horizon - 1];
        eta_y[5][7][0] = -0.4;
        let g = eta_g_from_eta_y(&eta_y, horizon);
        for (i, val) in g[5].iter().enumerate() {
            let t = i as isize - 1;
            let expected = if t == 5 || t == 6 { -0.4 } else { 0.0 };
            assert_eq!(val[0], expected, "t = {t}");
        }
    }
}
