//! Operator-splitting (ADMM) QP solver in the OSQP form
//!
//! ```text
//! (P + σI + Aᵀ diag(ρ) A) x̃ = σx − q + Aᵀ(ρ∘z − y)
//! x ← α x̃ + (1−α) x
//! z ← Π_[l,u](α A x̃ + (1−α) z + y/ρ)
//! y ← y + ρ∘(α A x̃ + (1−α) z_old − z)
//! ```
//!
//! followed by an active-set polish that solves the KKT equalities exactly.

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::problem::{QpProblem, QpSettings, QpSolution, QpStatus};
use crate::error::Result;
use crate::linalg::refined_solve;

/// Equality rows get this multiple of ρ.
const EQ_RHO_SCALE: f64 = 1e3;
/// ρ for rows with both bounds infinite.
const FREE_ROW_RHO: f64 = 1e-6;
/// ρ is kept within `[ρ₀·RHO_RANGE⁻¹, ρ₀·RHO_RANGE]`.
const RHO_RANGE: f64 = 1e4;
/// Refactor only when the suggested ρ moves by more than this factor.
const RHO_REFACTOR_RATIO: f64 = 5.0;
const RHO_UPDATE_EVERY: usize = 100;
const CHECK_EVERY: usize = 10;
/// Residual level at which polish attempts start.
const POLISH_TRIGGER: f64 = 1e-3;
const POLISH_EVERY: usize = 100;
const POLISH_DELTA: f64 = 1e-9;
const POLISH_REFINE_STEPS: usize = 10;
const POLISH_ACTIVE_SET_ROUNDS: usize = 25;
/// Active-bound detection for polish: slack ≤ ACTIVE_TOL·(1 + |bound|).
const ACTIVE_TOL: f64 = 1e-6;
const PINF_TOL: f64 = 1e-5;
/// Dual signs tolerated on the wrong side of zero.
const DUAL_SIGN_TOL: f64 = 1e-9;

pub fn solve(qp: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    qp.validate()?;
    settings.validate()?;
    let n = qp.n();
    let rows = qp.rows();

    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(rows);
    let mut y = DVector::zeros(rows);
    let mut rho = settings.rho;
    let rho_min = settings.rho / RHO_RANGE;
    let mut rho_vec = row_rho(qp, rho);
    let mut factor = factorize(qp, settings.sigma, &rho_vec);

    let mut best_primal = f64::INFINITY;
    let mut stall = 0usize;
    let mut last = (f64::INFINITY, f64::INFINITY);
    let mut rhs = DVector::zeros(n);
    let mut z_tilde = DVector::zeros(rows);

    for iter in 1..=settings.max_iter {
        let y_prev = y.clone();

        // x̃ step
        rhs.copy_from(&(&x * settings.sigma - &qp.q));
        if rows > 0 {
            let w = rho_vec.component_mul(&z) - &y;
            rhs.gemv_tr(1.0, &qp.a, &w, 1.0);
        }
        let x_tilde = factor.solve(&rhs);
        if rows > 0 {
            z_tilde.gemv(1.0, &qp.a, &x_tilde, 0.0);
        }
        x = &x_tilde * settings.alpha + &x * (1.0 - settings.alpha);
        let relaxed = &z_tilde * settings.alpha + &z * (1.0 - settings.alpha);
        let shifted = &relaxed + y.component_div(&rho_vec);
        let z_new = DVector::from_fn(rows, |i, _| shifted[i].clamp(qp.l[i], qp.u[i]));
        y += rho_vec.component_mul(&(&relaxed - &z_new));
        z = z_new;

        if iter % CHECK_EVERY != 0 && iter != settings.max_iter {
            continue;
        }
        let (r_prim, r_dual) = admm_residuals(qp, &x, &z, &y);
        last = (r_prim, r_dual);
        if r_prim <= settings.eps && r_dual <= settings.eps {
            debug!("admm converged after {iter} iterations");
            return Ok(finish(qp, settings, x, y, iter));
        }
        if settings.polish && iter % POLISH_EVERY == 0 && r_prim.max(r_dual) <= POLISH_TRIGGER {
            if let Some(sol) = polish(qp, settings, &z, &y, iter) {
                if sol.status == QpStatus::Optimal {
                    debug!("polish accepted after {iter} iterations");
                    return Ok(sol);
                }
            }
        }

        if primal_infeasible(qp, &(&y - &y_prev)) {
            debug!("primal infeasibility certificate at iteration {iter}");
            return Ok(summary(qp, x, y, QpStatus::InfeasibleCertificate, iter, false));
        }
        if r_prim < best_primal * (1.0 - 1e-9) {
            best_primal = r_prim;
            stall = 0;
        } else {
            stall += CHECK_EVERY;
            if stall >= settings.stall_iters && r_prim > settings.eps.sqrt() {
                debug!("primal residual stalled at {r_prim:.3e}");
                return Ok(summary(qp, x, y, QpStatus::InfeasibleCertificate, iter, false));
            }
        }

        if settings.adaptive_rho && iter % RHO_UPDATE_EVERY == 0 && rows > 0 {
            let suggested = suggest_rho(qp, rho, &x, &z, &y).clamp(rho_min, settings.rho * RHO_RANGE);
            let ratio = suggested / rho;
            if !(1.0 / RHO_REFACTOR_RATIO..=RHO_REFACTOR_RATIO).contains(&ratio) {
                rho = suggested;
                rho_vec = row_rho(qp, rho);
                factor = factorize(qp, settings.sigma, &rho_vec);
            }
        }
    }
    debug!("admm hit the iteration cap with residuals {:.3e}, {:.3e}", last.0, last.1);
    let mut out = summary(qp, x.clone(), y.clone(), QpStatus::MaxIter, settings.max_iter, false);
    if settings.polish {
        if let Some(sol) = polish(qp, settings, &z, &y, settings.max_iter) {
            if sol.status == QpStatus::Optimal {
                return Ok(sol);
            }
        }
    }
    out.status = QpStatus::MaxIter;
    Ok(out)
}

fn row_rho(qp: &QpProblem, rho: f64) -> DVector<f64> {
    DVector::from_fn(qp.rows(), |i, _| {
        if qp.l[i] == qp.u[i] {
            EQ_RHO_SCALE * rho
        } else if qp.l[i].is_infinite() && qp.u[i].is_infinite() {
            FREE_ROW_RHO
        } else {
            rho
        }
    })
}

fn factorize(qp: &QpProblem, sigma: f64, rho: &DVector<f64>) -> Cholesky<f64, Dyn> {
    let n = qp.n();
    let mut k = &qp.p + DMatrix::identity(n, n) * sigma;
    if qp.rows() > 0 {
        let scaled = DMatrix::from_fn(qp.rows(), n, |i, j| qp.a[(i, j)] * rho[i]);
        k.gemm_tr(1.0, &qp.a, &scaled, 1.0);
    }
    // σ > 0 makes the matrix positive definite
    Cholesky::new(k).expect("P + σI + AᵀρA is positive definite")
}

fn admm_residuals(qp: &QpProblem, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
    let r_prim = if qp.rows() > 0 { (&qp.a * x - z).amax() } else { 0.0 };
    (r_prim, qp.dual_residual(x, y))
}

fn suggest_rho(qp: &QpProblem, rho: f64, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let ax = &qp.a * x;
    let px = &qp.p * x;
    let aty = qp.a.tr_mul(y);
    let prim = (&ax - z).amax() / ax.amax().max(z.amax()).max(1e-30);
    let dual = (&px + &qp.q + &aty).amax() / px.amax().max(aty.amax()).max(qp.q.amax()).max(1e-30);
    if prim == 0.0 || dual == 0.0 {
        return rho;
    }
    rho * (prim / dual).sqrt()
}

fn primal_infeasible(qp: &QpProblem, dy: &DVector<f64>) -> bool {
    let norm = dy.amax();
    if norm < 1e-12 {
        return false;
    }
    if qp.a.tr_mul(dy).amax() > PINF_TOL * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        if dy[i] > 0.0 {
            if qp.u[i].is_infinite() {
                if dy[i] > PINF_TOL * norm {
                    return false;
                }
                continue;
            }
            support += qp.u[i] * dy[i];
        } else if dy[i] < 0.0 {
            if qp.l[i].is_infinite() {
                if -dy[i] > PINF_TOL * norm {
                    return false;
                }
                continue;
            }
            support += qp.l[i] * dy[i];
        }
    }
    support < -PINF_TOL * norm
}

fn summary(qp: &QpProblem, x: DVector<f64>, y: DVector<f64>, status: QpStatus, iterations: usize, polished: bool) -> QpSolution {
    QpSolution {
        primal_residual: qp.primal_residual(&x),
        dual_residual: qp.dual_residual(&x, &y),
        objective: qp.objective(&x),
        z: x,
        dual: y,
        status,
        iterations,
        polished,
    }
}

fn finish(qp: &QpProblem, settings: &QpSettings, x: DVector<f64>, y: DVector<f64>, iter: usize) -> QpSolution {
    let admm = summary(qp, x, y, QpStatus::Optimal, iter, false);
    if settings.polish {
        let z = &qp.a * &admm.z;
        if let Some(sol) = polish(qp, settings, &z, &admm.dual, iter) {
            if sol.status == QpStatus::Optimal
                && sol.primal_residual <= admm.primal_residual.max(settings.eps)
                && sol.dual_residual <= admm.dual_residual.max(settings.eps)
            {
                return sol;
            }
        }
    }
    admm
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Active {
    Lower,
    Upper,
    Both,
}

/// Solve the equality-constrained QP on a guessed active set, then repair
/// the set by dropping wrong-sign duals and adding violated rows.
fn polish(
    qp: &QpProblem,
    settings: &QpSettings,
    z: &DVector<f64>,
    y: &DVector<f64>,
    iter: usize,
) -> Option<QpSolution> {
    let rows = qp.rows();
    let mut active: Vec<Option<Active>> = (0..rows)
        .map(|i| {
            if qp.l[i] == qp.u[i] {
                return Some(Active::Both);
            }
            let near_lower = z[i] - qp.l[i] <= ACTIVE_TOL * (1.0 + qp.l[i].abs()) || z[i] - qp.l[i] < -y[i];
            let near_upper = qp.u[i] - z[i] <= ACTIVE_TOL * (1.0 + qp.u[i].abs()) || qp.u[i] - z[i] < y[i];
            match (near_lower && qp.l[i].is_finite(), near_upper && qp.u[i].is_finite()) {
                (true, false) => Some(Active::Lower),
                (false, true) => Some(Active::Upper),
                (true, true) => Some(if y[i] < 0.0 { Active::Lower } else { Active::Upper }),
                (false, false) => None,
            }
        })
        .collect();

    for _ in 0..POLISH_ACTIVE_SET_ROUNDS {
        let (zp, yp) = kkt_solve(qp, &active)?;
        let mut changed = false;
        // drop wrong-sign multipliers
        for i in 0..rows {
            let wrong = match active[i] {
                Some(Active::Lower) => yp[i] > DUAL_SIGN_TOL,
                Some(Active::Upper) => yp[i] < -DUAL_SIGN_TOL,
                _ => false,
            };
            if wrong {
                active[i] = None;
                changed = true;
            }
        }
        if !changed {
            // add violated rows
            let az = &qp.a * &zp;
            for i in 0..rows {
                if active[i].is_none() {
                    if az[i] > qp.u[i] + settings.eps {
                        active[i] = Some(Active::Upper);
                        changed = true;
                    } else if az[i] < qp.l[i] - settings.eps {
                        active[i] = Some(Active::Lower);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            let mut sol = summary(qp, zp, yp, QpStatus::Optimal, iter, true);
            let ok = sol.primal_residual <= settings.eps
                && sol.dual_residual <= settings.eps
                && qp.complementarity(&sol.z, &sol.dual) <= settings.eps.max(1e-9);
            if !ok {
                sol.status = QpStatus::MaxIter;
            }
            return Some(sol);
        }
    }
    None
}

fn kkt_solve(qp: &QpProblem, active: &[Option<Active>]) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = qp.n();
    let idx: Vec<usize> = (0..active.len()).filter(|&i| active[i].is_some()).collect();
    let k = idx.len();
    let mut exact = DMatrix::zeros(n + k, n + k);
    exact.view_mut((0, 0), (n, n)).copy_from(&qp.p);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-&qp.q));
    for (r, &i) in idx.iter().enumerate() {
        for j in 0..n {
            exact[(n + r, j)] = qp.a[(i, j)];
            exact[(j, n + r)] = qp.a[(i, j)];
        }
        rhs[n + r] = match active[i] {
            Some(Active::Lower) => qp.l[i],
            _ => qp.u[i],
        };
    }
    let mut reg = exact.clone();
    for j in 0..n {
        reg[(j, j)] += POLISH_DELTA;
    }
    for r in 0..k {
        reg[(n + r, n + r)] -= POLISH_DELTA;
    }
    let sol = refined_solve(&reg, &exact, &rhs, POLISH_REFINE_STEPS)?;
    let z = sol.rows(0, n).into_owned();
    let mut y = DVector::zeros(active.len());
    for (r, &i) in idx.iter().enumerate() {
        y[i] = sol[n + r];
    }
    Some((z, y))
}
