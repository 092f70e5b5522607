use nalgebra::{DMatrix, DVector};

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// Dense solve of `K x = rhs` by LU with a few steps of iterative
/// refinement against `exact` (which may differ from `k` by a small
/// regularization).
pub(crate) fn refined_solve(
    k: &DMatrix<f64>,
    exact: &DMatrix<f64>,
    rhs: &DVector<f64>,
    steps: usize,
) -> Option<DVector<f64>> {
    let lu = k.clone().lu();
    let mut sol = lu.solve(rhs)?;
    for _ in 0..steps {
        let resid = rhs - exact * &sol;
        if resid.amax() <= 1e-15 * (1.0 + rhs.amax()) {
            break;
        }
        sol += lu.solve(&resid)?;
    }
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}
