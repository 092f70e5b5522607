//! Structural sufficient conditions for existence of an optimal trajectory.
//!
//! Two routes are checked: compactness of the initial and control sets
//! together with closedness and (semi)continuity, or closedness plus weak
//! coercivity of the first stage cost. Both are sufficient conditions only; a
//! failing verdict never proves nonexistence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cost::{is_positive_definite, StageCost, TerminalCost};
use crate::dynamics::StageDynamics;
use crate::ocp::OcpSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Holds if user-supplied maps have the stated regularity.
    Assumed,
    NotEstablished,
}

impl Verdict {
    /// Conjunction: any failure dominates, then "not established", then "assumed".
    fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (NotEstablished, _) | (_, NotEstablished) => NotEstablished,
            (Assumed, _) | (_, Assumed) => Assumed,
            _ => Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Assumed => "assumed",
            Verdict::NotEstablished => "not-established",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    /// Route A: compactness, closedness, continuity.
    pub route_a: Verdict,
    /// Route B: closedness plus weak coercivity.
    pub route_b: Verdict,
    pub compact_initial_and_controls: Verdict,
    pub closed_state_sets: Verdict,
    pub continuous_dynamics: Verdict,
    pub lsc_costs: Verdict,
    pub closed_initial_and_controls: Verdict,
    pub coercive_first_stage: Verdict,
    pub notes: Vec<String>,
}

impl ExistenceReport {
    pub fn established(&self) -> bool {
        self.route_a == Verdict::Pass || self.route_b == Verdict::Pass
    }
}

pub fn check_existence(spec: &OcpSpec) -> ExistenceReport {
    let mut notes = Vec::new();

    let initial = spec.initial_set();
    let mut compact = Verdict::Pass;
    if !initial.is_compact() {
        compact = Verdict::Fail;
        notes.push("initial state set is unbounded".to_string());
    }
    for (t, u) in spec.control_sets.iter().enumerate() {
        if !u.is_compact() {
            compact = Verdict::Fail;
            notes.push(format!("control set U({t}) is unbounded"));
        }
        if matches!(u, crate::sets::ConvexSet::Singleton(_)) {
            notes.push(format!(
                "control set U({t}) is a singleton; the nonempty relative interior hypothesis is assumed"
            ));
        }
    }
    for (k, r) in spec.rate_bounds.iter().enumerate() {
        if *r == 0.0 {
            notes.push(format!("rate bound R_{k} is zero; the rate set has empty interior"));
        }
    }

    // every supported set variant is closed
    let closed_states = Verdict::Pass;
    let closed_initial = Verdict::Pass;

    let continuous = spec
        .dynamics
        .iter()
        .map(|f| match f {
            StageDynamics::Linear { .. } | StageDynamics::ControlAffine(_) => Verdict::Pass,
            StageDynamics::General(_) => Verdict::Assumed,
        })
        .fold(Verdict::Pass, Verdict::and);
    if continuous == Verdict::Assumed {
        notes.push("continuity of general dynamics is assumed, not verified".to_string());
    }

    let stage_lsc = spec
        .stage_costs
        .iter()
        .map(|c| match c {
            StageCost::Quadratic(_) => Verdict::Pass,
            StageCost::General(_) => Verdict::Assumed,
        })
        .fold(Verdict::Pass, Verdict::and);
    let terminal_lsc = match spec.terminal_cost {
        TerminalCost::Quadratic(_) => Verdict::Pass,
        TerminalCost::General(_) => Verdict::Assumed,
    };
    let lsc = stage_lsc.and(terminal_lsc);
    if lsc == Verdict::Assumed {
        notes.push("lower semicontinuity of general costs is assumed, not verified".to_string());
    }

    let coercive = match &spec.stage_costs[0] {
        StageCost::Quadratic(c) if is_positive_definite(&c.q) && is_positive_definite(&c.r) => {
            Verdict::Pass
        }
        _ => Verdict::NotEstablished,
    };

    let regularity = closed_states.and(continuous).and(lsc);
    ExistenceReport {
        route_a: compact.and(regularity),
        route_b: closed_initial.and(regularity).and(coercive),
        compact_initial_and_controls: compact,
        closed_state_sets: closed_states,
        continuous_dynamics: continuous,
        lsc_costs: lsc,
        closed_initial_and_controls: closed_initial,
        coercive_first_stage: coercive,
        notes,
    }
}

impl fmt::Display for ExistenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "existence (sufficient conditions)")?;
        let rows = [
            ("route A", self.route_a),
            ("  compact M(0), U(t)", self.compact_initial_and_controls),
            ("  closed M(t)", self.closed_state_sets),
            ("  continuous f", self.continuous_dynamics),
            ("  lsc costs", self.lsc_costs),
            ("route B", self.route_b),
            ("  closed M(0), U(t)", self.closed_initial_and_controls),
            ("  coercive c(0,.,.)", self.coercive_first_stage),
        ];
        for (name, v) in rows {
            writeln!(f, "  {name:<24} {v}")?;
        }
        for note in &self.notes {
            writeln!(f, "  note: {note}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{QuadraticCost, QuadraticTerminal};
    use crate::ocp::{InitialState, StationaryData};
    use crate::sets::{ConvexSet, NormKind};
    use nalgebra::{DMatrix, DVector};

    fn unbounded_controls(r: f64) -> OcpSpec {
        OcpSpec::time_invariant(
            4,
            StationaryData {
                dynamics: StageDynamics::linear(DMatrix::identity(2, 2), DMatrix::identity(2, 1)),
                stage_cost: StageCost::Quadratic(QuadraticCost::new(
                    DMatrix::identity(2, 2),
                    DMatrix::from_element(1, 1, r),
                )),
                terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::identity(2, 2))),
                state_set: ConvexSet::uniform_box(2, -5.0, 5.0).unwrap(),
                control_set: ConvexSet::whole(1),
                rate_bound: 1.0,
                rate_norm: NormKind::Inf,
                initial: InitialState::Fixed(DVector::zeros(2)),
            },
        )
        .unwrap()
    }

    #[test]
    fn coercive_quadratic_passes_route_b() {
        let report = check_existence(&unbounded_controls(0.5));
        assert_eq!(report.route_a, Verdict::Fail);
        assert_eq!(report.route_b, Verdict::Pass);
        assert!(report.established());
    }

    #[test]
    fn zero_control_weight_is_not_coercive() {
        let report = check_existence(&unbounded_controls(0.0));
        assert_eq!(report.route_a, Verdict::Fail);
        assert_eq!(report.route_b, Verdict::NotEstablished);
        assert!(!report.established());
    }

    #[test]
    fn singleton_controls_are_flagged() {
        let mut spec = unbounded_controls(1.0);
        spec.control_sets[2] = ConvexSet::zero(1);
        let report = check_existence(&spec);
        assert!(report.notes.iter().any(|n| n.contains("U(2)")));
    }
}
