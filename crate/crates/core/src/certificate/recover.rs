use super::{eta_g_from_eta_y, PmpCertificate};
use crate::error::{Error, Result};
use crate::qp::{QpSolution, QpStatus, RateOcpQp, RowTag};

/// Normal extremal lift (`ψ₀ = 1`) from the duals of an optimal QP solution.
///
/// With dynamics-row duals `ν`, state-box duals `α` and rate-row duals `μ`:
/// `η_f(t) = ν_t`, `η_f(−1) = 0`, `η_x(t) = −α_t`, and `η_y^k` vanishes
/// except `η_y^k(k+2) = −μ_k`, so the chains give
/// `η_g^k(k) = η_g^k(k+1) = −μ_k`. Control-box duals are what remains of
/// `∂H/∂u(t)` and need no multiplier of their own.
pub fn recover_multipliers(rq: &RateOcpQp, sol: &QpSolution) -> Result<PmpCertificate> {
    if sol.status != QpStatus::Optimal {
        return Err(Error::NotOptimal(sol.status));
    }
    if sol.dual.len() != rq.rows.len() {
        return Err(Error::dim("dual vector", rq.rows.len(), sol.dual.len()));
    }
    let spec = &rq.spec;
    let mut cert = PmpCertificate::zeros(spec);
    cert.psi0 = 1.0;
    for (tag, &y) in rq.rows.iter().zip(sol.dual.iter()) {
        match *tag {
            RowTag::Dynamics { t, i } => cert.eta_f[t + 1][i] = y,
            RowTag::StateBox { t, i } => cert.eta_x[t][i] = -y,
            RowTag::ControlBox { .. } => {}
            RowTag::Rate { k, i } => cert.eta_y[k][k + 2][i] = -y,
            RowTag::LiftDynamics { .. } | RowTag::LiftSet { .. } => {
                return Err(Error::Unsupported(
                    "multiplier recovery expects the direct transcription".into(),
                ))
            }
        }
    }
    cert.eta_g = eta_g_from_eta_y(&cert.eta_y, spec.horizon);
    Ok(cert)
}
