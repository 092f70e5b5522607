use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue};

/// Positive-definiteness threshold on the smallest eigenvalue.
pub const PD_TOL: f64 = 1e-10;

pub trait SmoothStageCost: Send + Sync {
    fn value(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;
    fn grad_x(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn grad_u(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
}

pub trait SmoothTerminalCost: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// `½ xᵀQx + ½ uᵀRu + qᵀx + rᵀu + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub state_linear: DVector<f64>,
    pub control_linear: DVector<f64>,
    pub offset: f64,
}

impl QuadraticCost {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        let (d, m) = (q.nrows(), r.nrows());
        QuadraticCost {
            q,
            r,
            state_linear: DVector::zeros(d),
            control_linear: DVector::zeros(m),
            offset: 0.0,
        }
    }

    pub fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * quad_form(&self.q, x)
            + 0.5 * quad_form(&self.r, u)
            + self.state_linear.dot(x)
            + self.control_linear.dot(u)
            + self.offset
    }

    pub fn grad_x(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.state_linear
    }

    pub fn grad_u(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.r * u + &self.control_linear
    }

    pub(crate) fn validate(&self, d: usize, m: usize, path: &str) -> Result<()> {
        check_square(&self.q, d, &format!("{path}.q"))?;
        check_square(&self.r, m, &format!("{path}.r"))?;
        if self.state_linear.len() != d {
            return Err(Error::dim(format!("{path}.state_linear"), d, self.state_linear.len()));
        }
        if self.control_linear.len() != m {
            return Err(Error::dim(format!("{path}.control_linear"), m, self.control_linear.len()));
        }
        check_psd(&self.q, &format!("{path}.q"))?;
        check_psd(&self.r, &format!("{path}.r"))
    }
}

/// `½ xᵀQx + qᵀx + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticTerminal {
    pub q: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub offset: f64,
}

impl QuadraticTerminal {
    pub fn new(q: DMatrix<f64>) -> Self {
        let d = q.nrows();
        QuadraticTerminal {
            q,
            linear: DVector::zeros(d),
            offset: 0.0,
        }
    }
}

#[derive(Clone)]
pub enum StageCost {
    Quadratic(QuadraticCost),
    General(Arc<dyn SmoothStageCost>),
}

#[derive(Clone)]
pub enum TerminalCost {
    Quadratic(QuadraticTerminal),
    General(Arc<dyn SmoothTerminalCost>),
}

impl StageCost {
    pub fn value(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        match self {
            StageCost::Quadratic(c) => c.value(x, u),
            StageCost::General(c) => c.value(t, x, u),
        }
    }

    pub fn grad_x(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            StageCost::Quadratic(c) => c.grad_x(x),
            StageCost::General(c) => c.grad_x(t, x, u),
        }
    }

    pub fn grad_u(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            StageCost::Quadratic(c) => c.grad_u(u),
            StageCost::General(c) => c.grad_u(t, x, u),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticCost> {
        match self {
            StageCost::Quadratic(c) => Some(c),
            StageCost::General(_) => None,
        }
    }
}

impl TerminalCost {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            TerminalCost::Quadratic(c) => 0.5 * quad_form(&c.q, x) + c.linear.dot(x) + c.offset,
            TerminalCost::General(c) => c.value(x),
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            TerminalCost::Quadratic(c) => &c.q * x + &c.linear,
            TerminalCost::General(c) => c.grad(x),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticTerminal> {
        match self {
            TerminalCost::Quadratic(c) => Some(c),
            TerminalCost::General(_) => None,
        }
    }
}

impl fmt::Debug for StageCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageCost::Quadratic(c) => f.debug_tuple("Quadratic").field(c).finish(),
            StageCost::General(_) => f.write_str("General(..)"),
        }
    }
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalCost::Quadratic(c) => f.debug_tuple("Quadratic").field(c).finish(),
            TerminalCost::General(_) => f.write_str("General(..)"),
        }
    }
}

impl PartialEq for StageCost {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (StageCost::Quadratic(a), StageCost::Quadratic(b)) => a == b,
            (StageCost::General(a), StageCost::General(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl PartialEq for TerminalCost {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (TerminalCost::Quadratic(a), TerminalCost::Quadratic(b)) => a == b,
            (TerminalCost::General(a), TerminalCost::General(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// `vᵀ M v` without temporaries.
pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        let mut col = 0.0;
        for i in 0..m.nrows() {
            col += m[(i, j)] * v[i];
        }
        acc += col * v[j];
    }
    acc
}

pub(crate) fn check_square(m: &DMatrix<f64>, n: usize, path: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidSpec(format!(
            "{path}: expected {n}×{n} matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_psd(m: &DMatrix<f64>, path: &str) -> Result<()> {
    if !is_symmetric(m, 1e-12) {
        return Err(Error::InvalidSpec(format!("{path}: matrix is not symmetric")));
    }
    if m.nrows() > 0 && min_eigenvalue(m) < -PD_TOL {
        return Err(Error::InvalidSpec(format!(
            "{path}: matrix is not positive semidefinite"
        )));
    }
    Ok(())
}

pub(crate) fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || min_eigenvalue(m) > PD_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_value_uses_half_convention() {
        let c = QuadraticCost::new(DMatrix::identity(1, 1), DMatrix::identity(1, 1));
        let x = DVector::from_element(1, 1.0);
        let u = DVector::from_element(1, 1.0);
        assert_eq!(c.value(&x, &u), 1.0);
    }

    #[test]
    fn asymmetric_weight_is_rejected() {
        let mut c = QuadraticCost::new(DMatrix::identity(2, 2), DMatrix::identity(1, 1));
        c.q[(0, 1)] = 0.5;
        assert!(c.validate(2, 1, "stage_cost[0]").is_err());
    }

    #[test]
    fn indefinite_weight_is_rejected() {
        let c = QuadraticCost::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            DMatrix::identity(1, 1),
        );
        let err = c.validate(2, 1, "stage_cost[3]").unwrap_err();
        assert!(err.to_string().contains("stage_cost[3].q"));
    }
}
