use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue};

/// `minimize ½ zᵀPz + qᵀz + offset  subject to  l ≤ Az ≤ u`.
///
/// Equality rows have `l = u`; infinite bounds are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
    pub offset: f64,
    pub layout: Option<VarLayout>,
}

/// `z` stacks `x(0..=T)` and then `u(0..T)`; lifted problems append
/// `y_k(0..=T)` for k = 0..T−2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarLayout {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    pub lifted: bool,
}

impl VarLayout {
    pub fn x(&self, t: usize) -> usize {
        t * self.state_dim
    }

    pub fn u(&self, t: usize) -> usize {
        (self.horizon + 1) * self.state_dim + t * self.control_dim
    }

    pub fn y(&self, k: usize, t: usize) -> usize {
        self.u(self.horizon) + (k * (self.horizon + 1) + t) * self.control_dim
    }

    pub fn len(&self) -> usize {
        if self.lifted {
            self.y(self.horizon - 1, 0)
        } else {
            self.u(self.horizon)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Minimum eigenvalue accepted for `P`.
pub const PSD_TOL: f64 = 1e-9;

impl QpProblem {
    pub fn new(
        p: DMatrix<f64>,
        q: DVector<f64>,
        a: DMatrix<f64>,
        l: DVector<f64>,
        u: DVector<f64>,
    ) -> Result<Self> {
        let qp = QpProblem {
            p,
            q,
            a,
            l,
            u,
            offset: 0.0,
            layout: None,
        };
        qp.validate()?;
        Ok(qp)
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn rows(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.p.nrows() != n || self.p.ncols() != n {
            return Err(Error::dim("P", n, self.p.nrows()));
        }
        if self.a.ncols() != n && self.a.nrows() > 0 {
            return Err(Error::dim("A columns", n, self.a.ncols()));
        }
        if self.a.nrows() != self.rows() || self.u.len() != self.rows() {
            return Err(Error::dim("constraint rows", self.a.nrows(), self.rows()));
        }
        for i in 0..self.rows() {
            if self.l[i].is_nan() || self.u[i].is_nan() || self.l[i] > self.u[i] {
                return Err(Error::InvalidSpec(format!(
                    "row {i}: lower bound {} exceeds upper bound {}",
                    self.l[i], self.u[i]
                )));
            }
        }
        if !is_symmetric(&self.p, 1e-12) {
            return Err(Error::InvalidSpec("P is not symmetric".into()));
        }
        if n > 0 && min_eigenvalue(&self.p) < -PSD_TOL {
            return Err(Error::InvalidSpec("P is not positive semidefinite".into()));
        }
        Ok(())
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * crate::cost::quad_form(&self.p, z) + self.q.dot(z) + self.offset
    }

    /// `‖Az − Π_[l,u](Az)‖∞`.
    pub fn primal_residual(&self, z: &DVector<f64>) -> f64 {
        let az = &self.a * z;
        (0..self.rows())
            .map(|i| (self.l[i] - az[i]).max(az[i] - self.u[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `‖Pz + q + Aᵀy‖∞`.
    pub fn dual_residual(&self, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.stationarity(z, y).amax()
    }

    pub fn stationarity(&self, z: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.p * z + &self.q;
        if self.rows() > 0 {
            r.gemv_tr(1.0, &self.a, y, 1.0);
        }
        r
    }

    /// `max_i |y_i| · dist(a_iᵀz, bound the sign of y_i selects)`.
    pub fn complementarity(&self, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let az = &self.a * z;
        (0..self.rows())
            .map(|i| {
                let slack = if y[i] > 0.0 {
                    self.u[i] - az[i]
                } else if y[i] < 0.0 {
                    az[i] - self.l[i]
                } else {
                    0.0
                };
                (y[i] * slack).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    /// Primal infeasibility certificate or stalled primal residual.
    InfeasibleCertificate,
}

/// Solver output. Duals follow `Pz + q + Aᵀy = 0`: `y_i ≥ 0` at an active
/// upper bound, `y_i ≤ 0` at an active lower bound, zero on inactive rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpSolution {
    #[serde(with = "crate::io::dvector")]
    pub z: DVector<f64>,
    #[serde(with = "crate::io::dvector")]
    pub dual: DVector<f64>,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    pub polished: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Absolute tolerance on both residuals.
    pub eps: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
    /// Iterations without primal-residual progress before declaring infeasibility.
    pub stall_iters: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            eps: 1e-7,
            max_iter: 200_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            polish: true,
            stall_iters: 5000,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("rho", self.rho), ("sigma", self.sigma)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidSpec(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        Ok(())
    }
}
