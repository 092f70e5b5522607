//! The rate-constrained optimal control problem and its trajectories.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cost::{check_square, StageCost, TerminalCost};
use crate::dynamics::StageDynamics;
use crate::error::{Error, Result};
use crate::sets::{ConvexSet, NormKind};

/// Absolute tolerance used when reporting constraint satisfaction of solver
/// output.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// `x(0)` is a decision variable constrained to `M(0)`.
    Free,
    Fixed(DVector<f64>),
}

/// Finite-horizon problem
///
/// ```text
/// minimize   Σ_{t<T} c(t, x(t), u(t)) + c_F(x(T))
/// subject to x(t+1) = f(t, x(t), u(t)),  x(t) ∈ M(t),  u(t) ∈ U(t),
///            ‖u(t+1) − u(t)‖ ≤ R_t  for t = 0..T−2.
/// ```
///
/// A rate bound of `+∞` leaves that step unconstrained.
#[derive(Clone, Debug, PartialEq)]
pub struct OcpSpec {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
    /// `f(t, ·, ·)` for t = 0..T−1.
    pub dynamics: Vec<StageDynamics>,
    /// `c(t, ·, ·)` for t = 0..T−1.
    pub stage_costs: Vec<StageCost>,
    pub terminal_cost: TerminalCost,
    /// `M(t)` for t = 0..T.
    pub state_sets: Vec<ConvexSet>,
    /// `U(t)` for t = 0..T−1.
    pub control_sets: Vec<ConvexSet>,
    /// `R_t` for t = 0..T−2.
    pub rate_bounds: Vec<f64>,
    pub rate_norm: NormKind,
    pub initial: InitialState,
}

/// Stage data shared by every time step, see [`OcpSpec::time_invariant`].
#[derive(Clone, Debug)]
pub struct StationaryData {
    pub dynamics: StageDynamics,
    pub stage_cost: StageCost,
    pub terminal_cost: TerminalCost,
    pub state_set: ConvexSet,
    pub control_set: ConvexSet,
    pub rate_bound: f64,
    pub rate_norm: NormKind,
    pub initial: InitialState,
}

impl OcpSpec {
    pub fn time_invariant(horizon: usize, data: StationaryData) -> Result<Self> {
        let state_dim = data.state_set.dim();
        let control_dim = data.control_set.dim();
        let spec = OcpSpec {
            horizon,
            state_dim,
            control_dim,
            dynamics: vec![data.dynamics; horizon],
            stage_costs: vec![data.stage_cost; horizon],
            terminal_cost: data.terminal_cost,
            state_sets: vec![data.state_set; horizon + 1],
            control_sets: vec![data.control_set; horizon],
            rate_bounds: vec![data.rate_bound; horizon.saturating_sub(1)],
            rate_norm: data.rate_norm,
            initial: data.initial,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (t_len, d, m) = (self.horizon, self.state_dim, self.control_dim);
        if t_len < 2 {
            return Err(Error::schema("horizon", format!("must be at least 2, got {t_len}")));
        }
        if d == 0 || m == 0 {
            return Err(Error::schema("state_dim", "state and control dimensions must be positive"));
        }
        let lengths = [
            ("dynamics", self.dynamics.len(), t_len, "T"),
            ("stage_cost", self.stage_costs.len(), t_len, "T"),
            ("state_sets", self.state_sets.len(), t_len + 1, "T+1"),
            ("control_sets", self.control_sets.len(), t_len, "T"),
            ("rate_bounds", self.rate_bounds.len(), t_len - 1, "T-1"),
        ];
        for (field, got, want, rule) in lengths {
            if got != want {
                return Err(Error::schema(
                    field,
                    format!("expected {want} entries ({rule} with T = {t_len}), got {got}"),
                ));
            }
        }
        for (t, dynamics) in self.dynamics.iter().enumerate() {
            if let StageDynamics::Linear { a, b, c } = dynamics {
                let path = format!("dynamics[{t}]");
                check_square(a, d, &format!("{path}.a"))?;
                if b.nrows() != d || b.ncols() != m {
                    return Err(Error::schema(
                        format!("{path}.b"),
                        format!("expected {d}×{m} matrix, got {}×{}", b.nrows(), b.ncols()),
                    ));
                }
                if c.len() != d {
                    return Err(Error::schema(format!("{path}.c"), format!("expected {d} entries")));
                }
            }
        }
        for (t, cost) in self.stage_costs.iter().enumerate() {
            if let StageCost::Quadratic(q) = cost {
                q.validate(d, m, &format!("stage_cost[{t}]"))?;
            }
        }
        if let TerminalCost::Quadratic(q) = &self.terminal_cost {
            check_square(&q.q, d, "terminal_cost.q")?;
            crate::cost::check_psd(&q.q, "terminal_cost.q")?;
            if q.linear.len() != d {
                return Err(Error::dim("terminal_cost.linear", d, q.linear.len()));
            }
        }
        for (t, set) in self.state_sets.iter().enumerate() {
            check_set(set, d, &format!("state_sets[{t}]"))?;
        }
        for (t, set) in self.control_sets.iter().enumerate() {
            check_set(set, m, &format!("control_sets[{t}]"))?;
        }
        for (t, r) in self.rate_bounds.iter().enumerate() {
            if r.is_nan() || *r < 0.0 {
                return Err(Error::schema(
                    format!("rate_bounds[{t}]"),
                    format!("must be a non-negative number, got {r}"),
                ));
            }
        }
        if let InitialState::Fixed(x0) = &self.initial {
            if x0.len() != d {
                return Err(Error::schema("initial_state.x0", format!("expected {d} entries, got {}", x0.len())));
            }
            if !self.state_sets[0].contains(x0)? {
                return Err(Error::schema("initial_state.x0", "lies outside state_sets[0]"));
            }
        }
        Ok(())
    }

    /// `M(0)`, or `{x0}` when the initial state is fixed.
    pub fn initial_set(&self) -> ConvexSet {
        match &self.initial {
            InitialState::Free => self.state_sets[0].clone(),
            InitialState::Fixed(x0) => ConvexSet::Singleton(x0.clone()),
        }
    }

    pub fn fixed_x0(&self) -> Option<&DVector<f64>> {
        match &self.initial {
            InitialState::Fixed(x0) => Some(x0),
            InitialState::Free => None,
        }
    }

    /// The rate set `{v : ‖v‖ ≤ R_k}`; the whole space for `R_k = ∞`.
    pub fn rate_set(&self, k: usize) -> ConvexSet {
        let r = self.rate_bounds[k];
        if r.is_infinite() {
            ConvexSet::Whole(self.control_dim)
        } else {
            ConvexSet::NormBall {
                center: DVector::zeros(self.control_dim),
                radius: r,
                norm: self.rate_norm,
            }
        }
    }

    /// Linear dynamics with quadratic costs at every stage.
    pub fn is_linear_quadratic(&self) -> bool {
        self.dynamics.iter().all(StageDynamics::is_linear)
            && self.stage_costs.iter().all(|c| c.as_quadratic().is_some())
            && self.terminal_cost.as_quadratic().is_some()
    }

    pub fn with_initial(mut self, initial: InitialState) -> Result<Self> {
        self.initial = initial;
        self.validate()?;
        Ok(self)
    }
}

fn check_set(set: &ConvexSet, dim: usize, path: &str) -> Result<()> {
    set.validate()
        .map_err(|e| Error::schema(path, e.to_string()))?;
    if set.dim() != dim {
        return Err(Error::schema(path, format!("expected dimension {dim}, got {}", set.dim())));
    }
    Ok(())
}

/// States `x(0..=T)` and controls `u(0..T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(with = "crate::io::vec_list")]
    pub x: Vec<DVector<f64>>,
    #[serde(with = "crate::io::vec_list")]
    pub u: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn zeros(spec: &OcpSpec) -> Self {
        Trajectory {
            x: vec![DVector::zeros(spec.state_dim); spec.horizon + 1],
            u: vec![DVector::zeros(spec.control_dim); spec.horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    pub fn check_shape(&self, spec: &OcpSpec) -> Result<()> {
        if self.x.len() != spec.horizon + 1 {
            return Err(Error::dim("trajectory states", spec.horizon + 1, self.x.len()));
        }
        if self.u.len() != spec.horizon {
            return Err(Error::dim("trajectory controls", spec.horizon, self.u.len()));
        }
        for (t, x) in self.x.iter().enumerate() {
            if x.len() != spec.state_dim {
                return Err(Error::dim(format!("x({t})"), spec.state_dim, x.len()));
            }
        }
        for (t, u) in self.u.iter().enumerate() {
            if u.len() != spec.control_dim {
                return Err(Error::dim(format!("u({t})"), spec.control_dim, u.len()));
            }
        }
        Ok(())
    }

    /// Componentwise `|u(t+1) − u(t)|` for t = 0..T−2, recomputed from `u`.
    pub fn rate_magnitudes(&self) -> Vec<DVector<f64>> {
        self.u.windows(2).map(|w| (&w[1] - &w[0]).abs()).collect()
    }
}

/// Forward recursion of the dynamics from `x0` under `u`.
pub fn rollout(spec: &OcpSpec, x0: &DVector<f64>, u: &[DVector<f64>]) -> Result<Trajectory> {
    if x0.len() != spec.state_dim {
        return Err(Error::dim("x0", spec.state_dim, x0.len()));
    }
    if u.len() != spec.horizon {
        return Err(Error::dim("control sequence", spec.horizon, u.len()));
    }
    let mut x = Vec::with_capacity(spec.horizon + 1);
    x.push(x0.clone());
    for (t, ut) in u.iter().enumerate() {
        if ut.len() != spec.control_dim {
            return Err(Error::dim(format!("u({t})"), spec.control_dim, ut.len()));
        }
        let next = spec.dynamics[t].eval(t, &x[t], ut);
        x.push(next);
    }
    Ok(Trajectory { x, u: u.to_vec() })
}

/// `Σ c(t, x(t), u(t)) + c_F(x(T))`.
pub fn total_cost(spec: &OcpSpec, traj: &Trajectory) -> Result<f64> {
    traj.check_shape(spec)?;
    let stages: f64 = (0..spec.horizon)
        .map(|t| spec.stage_costs[t].value(t, &traj.x[t], &traj.u[t]))
        .sum();
    Ok(stages + spec.terminal_cost.value(&traj.x[spec.horizon]))
}

/// Largest `‖x(t+1) − f(t, x(t), u(t))‖∞` and the stage where it occurs.
pub fn dynamics_defect(spec: &OcpSpec, traj: &Trajectory) -> Result<(f64, usize)> {
    traj.check_shape(spec)?;
    let mut worst = (0.0, 0);
    for t in 0..spec.horizon {
        let gap = (&traj.x[t + 1] - spec.dynamics[t].eval(t, &traj.x[t], &traj.u[t])).amax();
        if gap > worst.0 {
            worst = (gap, t);
        }
    }
    Ok(worst)
}

/// Largest violation of each constraint family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub state: f64,
    pub control: f64,
    pub rate: f64,
    pub initial: f64,
}

impl ConstraintViolation {
    pub fn max(&self) -> f64 {
        self.state.max(self.control).max(self.rate).max(self.initial)
    }
}

pub fn constraint_violation(spec: &OcpSpec, traj: &Trajectory) -> Result<ConstraintViolation> {
    traj.check_shape(spec)?;
    let mut out = ConstraintViolation::default();
    for (t, set) in spec.state_sets.iter().enumerate() {
        out.state = out.state.max(set.violation(&traj.x[t])?);
    }
    for (t, set) in spec.control_sets.iter().enumerate() {
        out.control = out.control.max(set.violation(&traj.u[t])?);
    }
    for k in 0..spec.horizon - 1 {
        let step = &traj.u[k + 1] - &traj.u[k];
        out.rate = out.rate.max(spec.rate_set(k).violation(&step)?);
    }
    if let Some(x0) = spec.fixed_x0() {
        out.initial = (x0 - &traj.x[0]).amax();
    }
    Ok(out)
}

/// Rotation-by-angle plant in the (x₁, x₂) plane with an integrator third
/// state, driven through `(0, 1, 1)ᵀ`.
pub fn rotation_integrator(angle: f64) -> StageDynamics {
    let (s, c) = angle.sin_cos();
    let a = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 1.0]);
    StageDynamics::linear(a, b)
}
