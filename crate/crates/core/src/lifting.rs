//! State lifting that turns the rate constraints into pointwise state
//! constraints.
//!
//! For every `k = 0..T−2` an auxiliary state `y_k(t) ∈ R^m` is carried along:
//!
//! ```text
//! y_k(0) = … = y_k(k) = 0
//! y_k(k+1) = −u(k)
//! y_k(k+2) = y_k(k+1) + u(k+1) = u(k+1) − u(k)
//! y_k(t)   = y_k(t−1)                       for t ≥ k+3
//! ```
//!
//! so the rate bound at step `k` becomes `y_k(t) ∈ {‖v‖ ≤ R_k}` for
//! `t ≥ k+2`. The extended state `w(t) = (x(t), y_0(t), …, y_{T−2}(t))`
//! lives in `R^q` with `q = d + (T−1)m`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocp::{total_cost, OcpSpec, Trajectory};
use crate::sets::ConvexSet;

/// Consistency tolerance of [`f21`].
pub const LIFT_TOL: f64 = 1e-9;

/// How the set `Y_{k+1}^k` constraining `y_k(k+1) = −u(k)` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YSetReading {
    /// `−U(k)`, consistent with `y_k(k+1) = −u(k)` and `u(k) ∈ U(k)`.
    #[default]
    ReflectedControlSet,
    /// `U(k+1)`, the set as literally indexed.
    LiteralNextControlSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTrajectory {
    #[serde(with = "crate::io::vec_list")]
    pub x: Vec<DVector<f64>>,
    /// `y[k][t]` for k = 0..T−2, t = 0..=T.
    #[serde(with = "crate::io::nested_vec_list")]
    pub y: Vec<Vec<DVector<f64>>>,
    #[serde(with = "crate::io::vec_list")]
    pub u: Vec<DVector<f64>>,
}

/// One step of the `y_k` recursion at time `t`.
pub fn g_step(
    horizon: usize,
    k: usize,
    t: usize,
    y: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if horizon < 2 || k > horizon - 2 {
        return Err(Error::IndexOutOfRange(format!("k = {k} with T = {horizon}")));
    }
    if t >= horizon {
        return Err(Error::IndexOutOfRange(format!("t = {t} with T = {horizon}")));
    }
    if y.len() != u.len() {
        return Err(Error::dim("y", u.len(), y.len()));
    }
    Ok(if t == k {
        -u
    } else if t == k + 1 {
        y + u
    } else {
        y.clone()
    })
}

fn lift_chain(horizon: usize, k: usize, u: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = u[0].len();
    let mut y = Vec::with_capacity(horizon + 1);
    y.push(DVector::zeros(m));
    for t in 0..horizon {
        let next = g_step(horizon, k, t, &y[t], &u[t]).expect("indices in range");
        y.push(next);
    }
    y
}

/// Lift a trajectory: every `y_k` is produced by iterating [`g_step`] from zero.
pub fn lift_trajectory(spec: &OcpSpec, traj: &Trajectory) -> Result<ExtendedTrajectory> {
    traj.check_shape(spec)?;
    let y = (0..spec.horizon - 1)
        .map(|k| lift_chain(spec.horizon, k, &traj.u))
        .collect();
    Ok(ExtendedTrajectory {
        x: traj.x.clone(),
        y,
        u: traj.u.clone(),
    })
}

/// The map taking original trajectories to lifted ones.
pub fn f12(spec: &OcpSpec, traj: &Trajectory) -> Result<ExtendedTrajectory> {
    lift_trajectory(spec, traj)
}

/// The inverse map: drop `y` after confirming it satisfies its recursion.
pub fn f21(spec: &OcpSpec, ext: &ExtendedTrajectory) -> Result<Trajectory> {
    let traj = Trajectory {
        x: ext.x.clone(),
        u: ext.u.clone(),
    };
    traj.check_shape(spec)?;
    if ext.y.len() != spec.horizon - 1 {
        return Err(Error::dim("lifted y blocks", spec.horizon - 1, ext.y.len()));
    }
    for (k, chain) in ext.y.iter().enumerate() {
        if chain.len() != spec.horizon + 1 {
            return Err(Error::dim(format!("y_{k}"), spec.horizon + 1, chain.len()));
        }
        let expected = lift_chain(spec.horizon, k, &ext.u);
        for (t, (got, want)) in chain.iter().zip(&expected).enumerate() {
            if got.len() != want.len() {
                return Err(Error::dim(format!("y_{k}({t})"), want.len(), got.len()));
            }
            let deviation = (got - want).amax();
            if deviation > LIFT_TOL {
                return Err(Error::InconsistentLift { k, t, deviation });
            }
        }
    }
    Ok(traj)
}

/// Block matrix `A_k` of size `m(T+1)` with `A_k ỹ_k = ū_k`, where `ỹ_k`
/// stacks `y_k(0..=T)`; see [`rate_rhs`] for `ū_k`.
pub fn build_rate_matrix(k: usize, horizon: usize, m: usize) -> Result<DMatrix<f64>> {
    if horizon < 2 || k > horizon - 2 {
        return Err(Error::IndexOutOfRange(format!("k = {k} with T = {horizon}")));
    }
    let n = m * (horizon + 1);
    let mut a = DMatrix::zeros(n, n);
    for t in 0..=horizon {
        for i in 0..m {
            a[(t * m + i, t * m + i)] = 1.0;
            if t != 0 && t != k + 1 {
                a[(t * m + i, (t - 1) * m + i)] = -1.0;
            }
        }
    }
    Ok(a)
}

/// Right-hand side `ū_k`: `−u(k)` in block `k+1`, `u(k+1)` in block `k+2`.
pub fn rate_rhs(k: usize, horizon: usize, u: &[DVector<f64>]) -> Result<DVector<f64>> {
    if horizon < 2 || k > horizon - 2 {
        return Err(Error::IndexOutOfRange(format!("k = {k} with T = {horizon}")));
    }
    if u.len() != horizon {
        return Err(Error::dim("control sequence", horizon, u.len()));
    }
    let m = u[0].len();
    let mut rhs = DVector::zeros(m * (horizon + 1));
    rhs.rows_mut((k + 1) * m, m).copy_from(&(-&u[k]));
    rhs.rows_mut((k + 2) * m, m).copy_from(&u[k + 1]);
    Ok(rhs)
}

/// `A_k` as CSV, one matrix row per line.
pub fn rate_matrix_csv(k: usize, horizon: usize, m: usize) -> Result<String> {
    let a = build_rate_matrix(k, horizon, m)?;
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// The original and lifted objectives on the same trajectory.
pub fn lifted_cost_equivalence(spec: &OcpSpec, traj: &Trajectory) -> Result<(f64, f64)> {
    let original = total_cost(spec, traj)?;
    let lifted = LiftedProblem::new(spec.clone(), YSetReading::default())
        .objective(&lift_trajectory(spec, traj)?)?;
    Ok((original, lifted))
}

/// The lifted problem with extended state `w ∈ R^q`.
#[derive(Clone, Debug)]
pub struct LiftedProblem {
    pub base: OcpSpec,
    pub reading: YSetReading,
}

impl LiftedProblem {
    pub fn new(base: OcpSpec, reading: YSetReading) -> Self {
        LiftedProblem { base, reading }
    }

    pub fn q(&self) -> usize {
        self.base.state_dim + (self.base.horizon - 1) * self.base.control_dim
    }

    pub fn y_set(&self, k: usize, t: usize) -> ConvexSet {
        let m = self.base.control_dim;
        if t <= k {
            ConvexSet::zero(m)
        } else if t == k + 1 {
            match self.reading {
                YSetReading::ReflectedControlSet => self.base.control_sets[k].reflect(),
                YSetReading::LiteralNextControlSet => self.base.control_sets[k + 1].clone(),
            }
        } else {
            self.base.rate_set(k)
        }
    }

    /// Factors of `W(t) = M(t) × Y_t^0 × … × Y_t^{T−2}`.
    pub fn extended_set(&self, t: usize) -> Vec<ConvexSet> {
        std::iter::once(self.base.state_sets[t].clone())
            .chain((0..self.base.horizon - 1).map(|k| self.y_set(k, t)))
            .collect()
    }

    /// Stack `w(t)`.
    pub fn pack(&self, ext: &ExtendedTrajectory, t: usize) -> DVector<f64> {
        let m = self.base.control_dim;
        let d = self.base.state_dim;
        let mut w = DVector::zeros(self.q());
        w.rows_mut(0, d).copy_from(&ext.x[t]);
        for (k, chain) in ext.y.iter().enumerate() {
            w.rows_mut(d + k * m, m).copy_from(&chain[t]);
        }
        w
    }

    /// Extended dynamics `w(t+1) = F(t, w(t), u(t))`.
    pub fn extended_step(&self, t: usize, w: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let (d, m, horizon) = (self.base.state_dim, self.base.control_dim, self.base.horizon);
        if w.len() != self.q() {
            return Err(Error::dim("extended state", self.q(), w.len()));
        }
        if t >= horizon {
            return Err(Error::IndexOutOfRange(format!("t = {t} with T = {horizon}")));
        }
        let mut next = DVector::zeros(self.q());
        let x = w.rows(0, d).into_owned();
        next.rows_mut(0, d).copy_from(&self.base.dynamics[t].eval(t, &x, u));
        for k in 0..horizon - 1 {
            let y = w.rows(d + k * m, m).into_owned();
            next.rows_mut(d + k * m, m).copy_from(&g_step(horizon, k, t, &y, u)?);
        }
        Ok(next)
    }

    /// Largest violation of `w(t) ∈ W(t)` and `u(t) ∈ U(t)`.
    pub fn violation(&self, ext: &ExtendedTrajectory) -> Result<f64> {
        let mut worst = 0.0f64;
        for t in 0..=self.base.horizon {
            worst = worst.max(self.base.state_sets[t].violation(&ext.x[t])?);
            for (k, chain) in ext.y.iter().enumerate() {
                worst = worst.max(self.y_set(k, t).violation(&chain[t])?);
            }
        }
        for (t, u) in ext.u.iter().enumerate() {
            worst = worst.max(self.base.control_sets[t].violation(u)?);
        }
        Ok(worst)
    }

    /// The lifted objective reads only `x` and `u`.
    pub fn objective(&self, ext: &ExtendedTrajectory) -> Result<f64> {
        total_cost(
            &self.base,
            &Trajectory {
                x: ext.x.clone(),
                u: ext.u.clone(),
            },
        )
    }
}
