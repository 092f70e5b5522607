//! Closed convex constraint sets: membership, projection and the supporting
//! cone machinery used by the maximization and sign conditions.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for set membership.
pub const SET_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Inf,
    Two,
}

impl NormKind {
    pub fn norm(self, v: &DVector<f64>) -> f64 {
        match self {
            NormKind::Inf => v.amax(),
            NormKind::Two => v.norm(),
        }
    }
}

/// A closed convex subset of `R^n`.
///
/// Box bounds may be infinite. Construct through the checked constructors;
/// [`ConvexSet::validate`] re-checks the invariants of a value built by hand.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexSet {
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    NormBall {
        center: DVector<f64>,
        radius: f64,
        norm: NormKind,
    },
    Singleton(DVector<f64>),
    Whole(usize),
}

impl ConvexSet {
    pub fn new_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let set = ConvexSet::Box { lower, upper };
        set.validate()?;
        Ok(set)
    }

    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        Self::new_box(
            DVector::from_column_slice(lower),
            DVector::from_column_slice(upper),
        )
    }

    /// Box `[lo, hi]^dim`.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(
            DVector::from_element(dim, lo),
            DVector::from_element(dim, hi),
        )
    }

    pub fn ball(center: DVector<f64>, radius: f64, norm: NormKind) -> Result<Self> {
        let set = ConvexSet::NormBall {
            center,
            radius,
            norm,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn singleton(point: DVector<f64>) -> Self {
        ConvexSet::Singleton(point)
    }

    pub fn zero(dim: usize) -> Self {
        ConvexSet::Singleton(DVector::zeros(dim))
    }

    pub fn whole(dim: usize) -> Self {
        ConvexSet::Whole(dim)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dim("box upper bound", lower.len(), upper.len()));
                }
                for i in 0..lower.len() {
                    let (l, u) = (lower[i], upper[i]);
                    if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY
                    {
                        return Err(Error::InvalidSpec(format!(
                            "box component {i}: lower {l} must not exceed upper {u}"
                        )));
                    }
                }
                Ok(())
            }
            ConvexSet::NormBall { center, radius, .. } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "ball radius must be finite and non-negative, got {radius}"
                    )));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("ball center must be finite".into()));
                }
                Ok(())
            }
            ConvexSet::Singleton(p) => {
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("singleton point must be finite".into()));
                }
                Ok(())
            }
            ConvexSet::Whole(_) => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::NormBall { center, .. } => center.len(),
            ConvexSet::Singleton(p) => p.len(),
            ConvexSet::Whole(n) => *n,
        }
    }

    fn check_dim(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::dim("point", self.dim(), p.len()));
        }
        Ok(())
    }

    /// Distance-like violation measure: zero inside the set, otherwise the
    /// largest excess of the defining inequalities.
    pub fn violation(&self, p: &DVector<f64>) -> Result<f64> {
        self.check_dim(p)?;
        Ok(match self {
            ConvexSet::Box { lower, upper } => (0..p.len())
                .map(|i| (lower[i] - p[i]).max(p[i] - upper[i]))
                .fold(0.0, f64::max),
            ConvexSet::NormBall {
                center,
                radius,
                norm,
            } => (norm.norm(&(p - center)) - radius).max(0.0),
            ConvexSet::Singleton(q) => (p - q).amax(),
            ConvexSet::Whole(_) => 0.0,
        })
    }

    /// Membership within [`SET_TOL`].
    pub fn contains(&self, p: &DVector<f64>) -> Result<bool> {
        self.contains_tol(p, SET_TOL)
    }

    pub fn contains_tol(&self, p: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.violation(p)? <= tol)
    }

    /// Euclidean projection onto the set (box-clamp for the max-norm ball).
    pub fn project(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(p)?;
        Ok(match self {
            ConvexSet::Box { lower, upper } => {
                DVector::from_fn(p.len(), |i, _| p[i].clamp(lower[i], upper[i]))
            }
            ConvexSet::NormBall {
                center,
                radius,
                norm,
            } => match norm {
                NormKind::Inf => DVector::from_fn(p.len(), |i, _| {
                    p[i].clamp(center[i] - radius, center[i] + radius)
                }),
                NormKind::Two => {
                    let off = p - center;
                    let n = off.norm();
                    if n <= *radius {
                        p.clone()
                    } else {
                        center + off * (radius / n)
                    }
                }
            },
            ConvexSet::Singleton(q) => q.clone(),
            ConvexSet::Whole(_) => p.clone(),
        })
    }

    /// Projection of `g` onto the supporting cone of the set at `p`.
    ///
    /// Bounds within `tol` of `p` count as active. `p` must lie in the set
    /// within `tol`.
    pub fn tangent_projection(
        &self,
        p: &DVector<f64>,
        g: &DVector<f64>,
        tol: f64,
    ) -> Result<DVector<f64>> {
        self.check_dim(p)?;
        if g.len() != p.len() {
            return Err(Error::dim("covector", p.len(), g.len()));
        }
        let violation = self.violation(p)?;
        if violation > tol {
            return Err(Error::NotInSet { violation });
        }
        Ok(match self {
            ConvexSet::Box { lower, upper } => box_tangent(p, g, |i| (lower[i], upper[i]), tol),
            ConvexSet::NormBall {
                center,
                radius,
                norm: NormKind::Inf,
            } => box_tangent(p, g, |i| (center[i] - radius, center[i] + radius), tol),
            ConvexSet::NormBall {
                center,
                radius,
                norm: NormKind::Two,
            } => {
                if *radius == 0.0 {
                    return Ok(DVector::zeros(p.len()));
                }
                let off = p - center;
                if off.norm() < radius - tol {
                    g.clone()
                } else {
                    let n = &off / off.norm();
                    let along = g.dot(&n);
                    if along > 0.0 {
                        g - n * along
                    } else {
                        g.clone()
                    }
                }
            }
            ConvexSet::Singleton(_) => DVector::zeros(p.len()),
            ConvexSet::Whole(_) => g.clone(),
        })
    }

    /// Largest increase rate of `⟨grad, ·⟩` over unit directions into the
    /// supporting cone at `p`; zero exactly when `grad` lies in the normal
    /// cone, i.e. the variational inequality holds.
    pub fn normal_cone_residual(&self, p: &DVector<f64>, grad: &DVector<f64>) -> Result<f64> {
        self.normal_cone_residual_tol(p, grad, SET_TOL)
    }

    pub fn normal_cone_residual_tol(
        &self,
        p: &DVector<f64>,
        grad: &DVector<f64>,
        tol: f64,
    ) -> Result<f64> {
        Ok(self.tangent_projection(p, grad, tol)?.norm())
    }

    /// The reflected set `{-v : v in self}`.
    pub fn reflect(&self) -> ConvexSet {
        match self {
            ConvexSet::Box { lower, upper } => ConvexSet::Box {
                lower: -upper,
                upper: -lower,
            },
            ConvexSet::NormBall {
                center,
                radius,
                norm,
            } => ConvexSet::NormBall {
                center: -center,
                radius: *radius,
                norm: *norm,
            },
            ConvexSet::Singleton(p) => ConvexSet::Singleton(-p),
            ConvexSet::Whole(n) => ConvexSet::Whole(*n),
        }
    }

    pub fn is_compact(&self) -> bool {
        match self {
            ConvexSet::Box { lower, upper } => {
                lower.iter().all(|v| v.is_finite()) && upper.iter().all(|v| v.is_finite())
            }
            ConvexSet::NormBall { .. } | ConvexSet::Singleton(_) => true,
            ConvexSet::Whole(n) => *n == 0,
        }
    }

    /// True when the set has empty interior in its ambient space.
    pub fn is_degenerate(&self) -> bool {
        match self {
            ConvexSet::Box { lower, upper } => (0..lower.len()).any(|i| lower[i] == upper[i]),
            ConvexSet::NormBall { radius, .. } => *radius == 0.0,
            ConvexSet::Singleton(p) => !p.is_empty(),
            ConvexSet::Whole(_) => false,
        }
    }

    /// Finite componentwise bounds enclosing the set, if any.
    pub fn bounding_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            ConvexSet::Box { lower, upper } => {
                self.is_compact().then(|| (lower.clone(), upper.clone()))
            }
            ConvexSet::NormBall { center, radius, .. } => Some((
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
            ConvexSet::Singleton(p) => Some((p.clone(), p.clone())),
            ConvexSet::Whole(_) => None,
        }
    }

    /// Extreme points worth probing when maximizing a concave function over
    /// the set: box corners, or the axis points of a Euclidean ball.
    pub fn probe_vertices(&self) -> Vec<DVector<f64>> {
        match self {
            ConvexSet::Box { .. }
            | ConvexSet::NormBall {
                norm: NormKind::Inf,
                ..
            } => {
                let Some((lo, hi)) = self.bounding_box() else {
                    return Vec::new();
                };
                let n = lo.len();
                if n > 16 {
                    return Vec::new();
                }
                (0..1usize << n)
                    .map(|mask| {
                        DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                    })
                    .collect()
            }
            ConvexSet::NormBall { center, radius, .. } => {
                let n = center.len();
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    for s in [-1.0, 1.0] {
                        let mut v = center.clone();
                        v[i] += s * radius;
                        out.push(v);
                    }
                }
                out
            }
            ConvexSet::Singleton(p) => vec![p.clone()],
            ConvexSet::Whole(_) => Vec::new(),
        }
    }
}

fn box_tangent(
    p: &DVector<f64>,
    g: &DVector<f64>,
    bounds: impl Fn(usize) -> (f64, f64),
    tol: f64,
) -> DVector<f64> {
    DVector::from_fn(p.len(), |i, _| {
        let (l, u) = bounds(i);
        let at_lower = p[i] - l <= tol;
        let at_upper = u - p[i] <= tol;
        match (at_lower, at_upper) {
            (true, true) => 0.0,
            (false, true) => g[i].min(0.0),
            (true, false) => g[i].max(0.0),
            (false, false) => g[i],
        }
    })
}
