//! Direct transcription of linear-quadratic rate-constrained problems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{QpProblem, VarLayout};
use crate::cost::{StageCost, TerminalCost};
use crate::dynamics::StageDynamics;
use crate::error::{Error, Result};
use crate::lifting::{LiftedProblem, YSetReading};
use crate::ocp::{OcpSpec, Trajectory};
use crate::sets::{ConvexSet, NormKind};

/// What a constraint row encodes. `i` is the vector component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RowTag {
    /// `x(t+1) − A x(t) − B u(t) = c`.
    Dynamics { t: usize, i: usize },
    /// `x(t)_i ∈ M(t)`; with a fixed initial state the `t = 0` rows are equalities.
    StateBox { t: usize, i: usize },
    ControlBox { t: usize, i: usize },
    /// `u(k+1)_i − u(k)_i ∈ [−R_k, R_k]`.
    Rate { k: usize, i: usize },
    /// Defining recursion of `y_k(t+1)` in the lifted transcription.
    LiftDynamics { k: usize, t: usize, i: usize },
    /// `y_k(t)_i ∈ Y_t^k`.
    LiftSet { k: usize, t: usize, i: usize },
}

/// The QP of a rate-constrained LQ problem with a tag per row.
#[derive(Clone, Debug)]
pub struct RateOcpQp {
    pub spec: OcpSpec,
    pub qp: QpProblem,
    pub rows: Vec<RowTag>,
}

impl RateOcpQp {
    pub fn layout(&self) -> VarLayout {
        self.qp.layout.expect("transcribed problems carry a layout")
    }

    /// Rows carrying a given tag kind, in order.
    pub fn count(&self, pred: impl Fn(&RowTag) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(r)).count()
    }

    pub fn unpack(&self, z: &DVector<f64>) -> Trajectory {
        let lay = self.layout();
        let (d, m) = (lay.state_dim, lay.control_dim);
        Trajectory {
            x: (0..=lay.horizon).map(|t| z.rows(lay.x(t), d).into_owned()).collect(),
            u: (0..lay.horizon).map(|t| z.rows(lay.u(t), m).into_owned()).collect(),
        }
    }

    pub fn pack(&self, traj: &Trajectory) -> DVector<f64> {
        let lay = self.layout();
        let mut z = DVector::zeros(lay.len());
        for (t, x) in traj.x.iter().enumerate() {
            z.rows_mut(lay.x(t), lay.state_dim).copy_from(x);
        }
        for (t, u) in traj.u.iter().enumerate() {
            z.rows_mut(lay.u(t), lay.control_dim).copy_from(u);
        }
        z
    }
}

/// Componentwise bounds of a polyhedral set.
fn box_bounds(set: &ConvexSet, path: &str) -> Result<(DVector<f64>, DVector<f64>)> {
    match set {
        ConvexSet::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
        ConvexSet::NormBall { norm: NormKind::Inf, .. } => Ok(set.bounding_box().expect("balls are bounded")),
        ConvexSet::NormBall { center, .. } if center.len() == 1 => Ok(set.bounding_box().expect("balls are bounded")),
        ConvexSet::Singleton(p) => Ok((p.clone(), p.clone())),
        ConvexSet::Whole(n) => Ok((
            DVector::from_element(*n, f64::NEG_INFINITY),
            DVector::from_element(*n, f64::INFINITY),
        )),
        ConvexSet::NormBall { .. } => Err(Error::Unsupported(format!(
            "{path}: Euclidean balls in dimension > 1 are not polyhedral"
        ))),
    }
}

struct Builder {
    n: usize,
    a: Vec<Vec<(usize, f64)>>,
    l: Vec<f64>,
    u: Vec<f64>,
    tags: Vec<RowTag>,
}

impl Builder {
    fn row(&mut self, entries: Vec<(usize, f64)>, l: f64, u: f64, tag: RowTag) {
        self.a.push(entries);
        self.l.push(l);
        self.u.push(u);
        self.tags.push(tag);
    }

    fn finish(self, p: DMatrix<f64>, q: DVector<f64>, offset: f64, layout: VarLayout) -> Result<(QpProblem, Vec<RowTag>)> {
        let mut a = DMatrix::zeros(self.a.len(), self.n);
        for (r, entries) in self.a.iter().enumerate() {
            for &(j, v) in entries {
                a[(r, j)] += v;
            }
        }
        let mut qp = QpProblem::new(p, q, a, DVector::from_vec(self.l), DVector::from_vec(self.u))?;
        qp.offset = offset;
        qp.layout = Some(layout);
        Ok((qp, self.tags))
    }
}

fn check_transcribable(spec: &OcpSpec) -> Result<()> {
    spec.validate()?;
    if !spec.is_linear_quadratic() {
        return Err(Error::Unsupported(
            "transcription needs linear dynamics and quadratic costs".into(),
        ));
    }
    if spec.rate_norm == NormKind::Two && spec.control_dim > 1 {
        return Err(Error::Unsupported(
            "Euclidean rate bounds with m > 1 are not polyhedral".into(),
        ));
    }
    Ok(())
}

/// Shared objective and dynamics/state/control rows.
fn base_rows(spec: &OcpSpec, lay: VarLayout) -> Result<(Builder, DMatrix<f64>, DVector<f64>, f64)> {
    let (horizon, d, m) = (spec.horizon, spec.state_dim, spec.control_dim);
    let n = lay.len();
    let mut p = DMatrix::zeros(n, n);
    let mut q = DVector::zeros(n);
    let mut offset = 0.0;
    for t in 0..horizon {
        let StageCost::Quadratic(c) = &spec.stage_costs[t] else { unreachable!() };
        p.view_mut((lay.x(t), lay.x(t)), (d, d)).copy_from(&c.q);
        p.view_mut((lay.u(t), lay.u(t)), (m, m)).copy_from(&c.r);
        q.rows_mut(lay.x(t), d).copy_from(&c.state_linear);
        q.rows_mut(lay.u(t), m).copy_from(&c.control_linear);
        offset += c.offset;
    }
    let TerminalCost::Quadratic(cf) = &spec.terminal_cost else { unreachable!() };
    p.view_mut((lay.x(horizon), lay.x(horizon)), (d, d)).copy_from(&cf.q);
    q.rows_mut(lay.x(horizon), d).copy_from(&cf.linear);
    offset += cf.offset;

    let mut b = Builder { n, a: Vec::new(), l: Vec::new(), u: Vec::new(), tags: Vec::new() };
    for t in 0..horizon {
        let StageDynamics::Linear { a, b: bm, c } = &spec.dynamics[t] else { unreachable!() };
        for i in 0..d {
            let mut row = vec![(lay.x(t + 1) + i, 1.0)];
            row.extend((0..d).filter(|&j| a[(i, j)] != 0.0).map(|j| (lay.x(t) + j, -a[(i, j)])));
            row.extend((0..m).filter(|&j| bm[(i, j)] != 0.0).map(|j| (lay.u(t) + j, -bm[(i, j)])));
            b.row(row, c[i], c[i], RowTag::Dynamics { t, i });
        }
    }
    for t in 0..=horizon {
        let set = if t == 0 { spec.initial_set() } else { spec.state_sets[t].clone() };
        let (lo, hi) = box_bounds(&set, &format!("state_sets[{t}]"))?;
        for i in 0..d {
            b.row(vec![(lay.x(t) + i, 1.0)], lo[i], hi[i], RowTag::StateBox { t, i });
        }
    }
    for t in 0..horizon {
        let (lo, hi) = box_bounds(&spec.control_sets[t], &format!("control_sets[{t}]"))?;
        for i in 0..m {
            b.row(vec![(lay.u(t) + i, 1.0)], lo[i], hi[i], RowTag::ControlBox { t, i });
        }
    }
    Ok((b, p, q, offset))
}

/// Transcribe with `z = (x(0..=T), u(0..T))`. Rate steps with `R_k = ∞`
/// get no rows.
pub fn transcribe(spec: &OcpSpec) -> Result<RateOcpQp> {
    check_transcribable(spec)?;
    let lay = VarLayout {
        horizon: spec.horizon,
        state_dim: spec.state_dim,
        control_dim: spec.control_dim,
        lifted: false,
    };
    let (mut b, p, q, offset) = base_rows(spec, lay)?;
    for k in 0..spec.horizon - 1 {
        let r = spec.rate_bounds[k];
        if r.is_infinite() {
            continue;
        }
        for i in 0..spec.control_dim {
            b.row(
                vec![(lay.u(k + 1) + i, 1.0), (lay.u(k) + i, -1.0)],
                -r,
                r,
                RowTag::Rate { k, i },
            );
        }
    }
    let (qp, rows) = b.finish(p, q, offset, lay)?;
    Ok(RateOcpQp { spec: spec.clone(), qp, rows })
}

/// Transcribe the lifted problem with every `y_k(t)` as a decision variable,
/// its defining recursion as equality rows and `y_k(t) ∈ Y_t^k` as box rows.
pub fn transcribe_lifted(spec: &OcpSpec, reading: YSetReading) -> Result<RateOcpQp> {
    check_transcribable(spec)?;
    let (horizon, m) = (spec.horizon, spec.control_dim);
    let lay = VarLayout {
        horizon,
        state_dim: spec.state_dim,
        control_dim: m,
        lifted: true,
    };
    let lifted = LiftedProblem::new(spec.clone(), reading);
    let (mut b, p, q, offset) = base_rows(spec, lay)?;
    for k in 0..horizon - 1 {
        for t in 0..horizon {
            for i in 0..m {
                let next = (lay.y(k, t + 1) + i, 1.0);
                let row = if t == k {
                    vec![next, (lay.u(t) + i, 1.0)]
                } else if t == k + 1 {
                    vec![next, (lay.y(k, t) + i, -1.0), (lay.u(t) + i, -1.0)]
                } else {
                    vec![next, (lay.y(k, t) + i, -1.0)]
                };
                b.row(row, 0.0, 0.0, RowTag::LiftDynamics { k, t, i });
            }
        }
        for t in 0..=horizon {
            let set = lifted.y_set(k, t);
            let (lo, hi) = box_bounds(&set, &format!("Y[{k}][{t}]"))?;
            for i in 0..m {
                b.row(vec![(lay.y(k, t) + i, 1.0)], lo[i], hi[i], RowTag::LiftSet { k, t, i });
            }
        }
    }
    let (qp, rows) = b.finish(p, q, offset, lay)?;
    Ok(RateOcpQp { spec: spec.clone(), qp, rows })
}
