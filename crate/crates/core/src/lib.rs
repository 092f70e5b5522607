//! Rate-constrained discrete-time optimal control.
//!
//! The crate models finite-horizon problems whose controls are limited both in
//! magnitude and in step-to-step change, lifts the rate limits into auxiliary
//! states, solves linear-quadratic instances as QPs, and checks candidate
//! solutions against a discrete maximum principle with explicit multipliers.

pub mod certificate;
pub mod cost;
pub mod derivcheck;
pub mod dynamics;
pub mod error;
pub mod existence;
pub mod experiment;
pub mod io;
pub mod lifting;
mod linalg;
pub mod ocp;
pub mod qp;
pub mod sets;

pub use certificate::{check_certificate, exact_max_check, recover_multipliers, PmpCertificate, ResidualReport};
pub use cost::{QuadraticCost, QuadraticTerminal, StageCost, TerminalCost};
pub use dynamics::StageDynamics;
pub use error::{Error, Result};
pub use existence::{check_existence, ExistenceReport, Verdict};
pub use lifting::{ExtendedTrajectory, LiftedProblem, YSetReading};
pub use ocp::{rollout, total_cost, InitialState, OcpSpec, Trajectory};
pub use qp::{solve, solve_ocp, QpProblem, QpSettings, QpSolution, QpStatus, RateOcpQp};
pub use sets::{ConvexSet, NormKind};
