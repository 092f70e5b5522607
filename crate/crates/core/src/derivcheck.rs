//! Central finite-difference checks for analytic derivatives.

use nalgebra::{DMatrix, DVector};

/// Step of the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Central-difference Jacobian of `f` at `x`; column `j` is `∂f/∂x_j`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + FD_STEP;
        let plus = f(&probe);
        probe[j] = x[j] - FD_STEP;
        let minus = f(&probe);
        probe[j] = x[j];
        jac.set_column(j, &((plus - minus) / (2.0 * FD_STEP)));
    }
    jac
}

/// Central-difference gradient of a scalar map.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let jac = fd_jacobian(|p| DVector::from_element(1, f(p)), x);
    jac.row(0).transpose()
}

/// `‖analytic − fd‖∞ / max(1, ‖fd‖∞)`.
pub fn relative_error(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (analytic - fd).amax() / fd.amax().max(1.0)
}
