//! Quadratic programs: transcription, an ADMM solver with polishing, and a
//! grid-search oracle.

mod admm;
pub mod export;
pub mod oracle;
mod problem;
pub mod transcribe;

pub use admm::solve;
pub use export::export_triplets;
pub use oracle::brute_force_oracle;
pub use problem::{QpProblem, QpSettings, QpSolution, QpStatus, VarLayout};
pub use transcribe::{transcribe, transcribe_lifted, RateOcpQp, RowTag};

use crate::error::{Error, Result};
use crate::ocp::{constraint_violation, dynamics_defect, OcpSpec, Trajectory, FEAS_TOL};

/// Transcribe, solve and unpack. Fails unless the solver reports optimality,
/// the trajectory reproduces the dynamics and all constraints hold within
/// [`FEAS_TOL`].
pub fn solve_ocp(spec: &OcpSpec, settings: &QpSettings) -> Result<(Trajectory, QpSolution, RateOcpQp)> {
    let rq = transcribe(spec)?;
    let sol = solve(&rq.qp, settings)?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::NotOptimal(sol.status));
    }
    let traj = rq.unpack(&sol.z);
    let (defect, t) = dynamics_defect(spec, &traj)?;
    if defect > FEAS_TOL {
        return Err(Error::Inconsistent(format!("dynamics defect {defect:.3e} at t = {t}")));
    }
    let violation = constraint_violation(spec, &traj)?;
    if violation.max() > FEAS_TOL {
        return Err(Error::Inconsistent(format!("constraint violation {:.3e}", violation.max())));
    }
    Ok((traj, sol, rq))
}
