use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Drift `f(x)` and input matrix `G(x)` of `x⁺ = f(x) + G(x) u`.
pub trait ControlAffineField: Send + Sync {
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `∂f/∂x`, d×d.
    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `G(x)`, d×m.
    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// `∂G/∂x_j` for j = 0..d, each d×m.
    fn input_matrix_derivative(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>>;
}

/// General smooth stage map `(t, x, u) ↦ f(t, x, u)`.
pub trait SmoothDynamics: Send + Sync {
    fn eval(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn jacobian_x(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    fn jacobian_u(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
}

/// One stage of the recursion `x(t+1) = f(t, x(t), u(t))`.
#[derive(Clone)]
pub enum StageDynamics {
    /// `x⁺ = A x + B u + c`.
    Linear {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
    },
    ControlAffine(Arc<dyn ControlAffineField>),
    General(Arc<dyn SmoothDynamics>),
}

impl fmt::Debug for StageDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageDynamics::Linear { a, b, c } => f
                .debug_struct("Linear")
                .field("a", a)
                .field("b", b)
                .field("c", c)
                .finish(),
            StageDynamics::ControlAffine(_) => f.write_str("ControlAffine(..)"),
            StageDynamics::General(_) => f.write_str("General(..)"),
        }
    }
}

impl PartialEq for StageDynamics {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                StageDynamics::Linear { a, b, c },
                StageDynamics::Linear {
                    a: a2,
                    b: b2,
                    c: c2,
                },
            ) => a == a2 && b == b2 && c == c2,
            (StageDynamics::ControlAffine(p), StageDynamics::ControlAffine(q)) => Arc::ptr_eq(p, q),
            (StageDynamics::General(p), StageDynamics::General(q)) => Arc::ptr_eq(p, q),
            _ => false,
        }
    }
}

impl StageDynamics {
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let c = DVector::zeros(a.nrows());
        StageDynamics::Linear { a, b, c }
    }

    pub fn eval(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        match self {
            StageDynamics::Linear { a, b, c } => a * x + b * u + c,
            StageDynamics::ControlAffine(field) => field.drift(x) + field.input_matrix(x) * u,
            StageDynamics::General(map) => map.eval(t, x, u),
        }
    }

    /// Allocation-free evaluation for the linear case; falls back to
    /// [`StageDynamics::eval`] otherwise.
    pub fn eval_into(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            StageDynamics::Linear { a, b, c } => {
                // same summation order as `eval`
                out.gemv(1.0, a, x, 0.0);
                out.gemv(1.0, b, u, 1.0);
                *out += c;
            }
            _ => out.copy_from(&self.eval(t, x, u)),
        }
    }

    pub fn jacobian_x(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        match self {
            StageDynamics::Linear { a, .. } => a.clone(),
            StageDynamics::ControlAffine(field) => {
                let mut jac = field.drift_jacobian(x);
                for (j, dg) in field.input_matrix_derivative(x).iter().enumerate() {
                    let col = dg * u;
                    let mut target = jac.column_mut(j);
                    target += col;
                }
                jac
            }
            StageDynamics::General(map) => map.jacobian_x(t, x, u),
        }
    }

    pub fn jacobian_u(&self, t: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        match self {
            StageDynamics::Linear { b, .. } => b.clone(),
            StageDynamics::ControlAffine(field) => field.input_matrix(x),
            StageDynamics::General(map) => map.jacobian_u(t, x, u),
        }
    }

    /// Linear and control-affine stages are affine in `u`.
    pub fn is_control_affine(&self) -> bool {
        !matches!(self, StageDynamics::General(_))
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, StageDynamics::Linear { .. })
    }
}
