//! Exhaustive grid search over control sequences.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ocp::{OcpSpec, Trajectory};
use crate::sets::SET_TOL;

/// Largest number of complete sequences the oracle will consider.
pub const ORACLE_CAP: f64 = 1e7;

/// Componentwise grid `lo, lo + h, …` over the bounding box of `U(t)`, with
/// `hi` appended when it is not a grid point; points outside `U(t)` are dropped.
fn control_grid(spec: &OcpSpec, t: usize, step: f64) -> Result<Vec<DVector<f64>>> {
    let set = &spec.control_sets[t];
    let (lo, hi) = set
        .bounding_box()
        .ok_or_else(|| Error::Unsupported(format!("control_sets[{t}] is unbounded")))?;
    let counts: Vec<f64> = (0..lo.len()).map(|i| ((hi[i] - lo[i]) / step + 1e-9).floor()).collect();
    let estimate: f64 = counts.iter().map(|c| c + 1.0).product();
    if estimate > ORACLE_CAP {
        return Err(Error::SearchSpaceTooLarge { size: estimate, cap: ORACLE_CAP });
    }
    let axes: Vec<Vec<f64>> = (0..lo.len())
        .map(|i| {
            let count = counts[i] as usize;
            let mut axis: Vec<f64> = (0..=count).map(|j| lo[i] + j as f64 * step).collect();
            if hi[i] - axis[count] > 1e-12 {
                axis.push(hi[i]);
            } else {
                axis[count] = axis[count].min(hi[i]);
            }
            axis
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    if total as f64 > ORACLE_CAP {
        return Err(Error::SearchSpaceTooLarge { size: total as f64, cap: ORACLE_CAP });
    }
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let p = DVector::from_fn(axes.len(), |i, _| axes[i][idx[i]]);
        if set.contains(&p)? {
            out.push(p);
        }
        // odometer with the first component most significant
        let mut i = axes.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

struct Search<'a> {
    spec: &'a OcpSpec,
    grids: Vec<Vec<DVector<f64>>>,
    x: Vec<DVector<f64>>,
    choice: Vec<usize>,
    diff: DVector<f64>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn descend(&mut self, t: usize, prefix: f64) {
        let spec = self.spec;
        if t == spec.horizon {
            let total = prefix + spec.terminal_cost.value(&self.x[t]);
            // strict improvement keeps the lexicographically first minimizer
            if self.best.as_ref().is_none_or(|(b, _)| total < *b) {
                self.best = Some((total, self.choice.clone()));
            }
            return;
        }
        for c in 0..self.grids[t].len() {
            let u = &self.grids[t][c];
            if t > 0 {
                let prev = &self.grids[t - 1][self.choice[t - 1]];
                self.diff.copy_from(u);
                self.diff -= prev;
                let r = spec.rate_bounds[t - 1];
                if spec.rate_norm.norm(&self.diff) > r + SET_TOL {
                    continue;
                }
            }
            let (head, tail) = self.x.split_at_mut(t + 1);
            spec.dynamics[t].eval_into(t, &head[t], u, &mut tail[0]);
            if spec.state_sets[t + 1].violation(&tail[0]).unwrap_or(f64::INFINITY) > SET_TOL {
                continue;
            }
            let stage = spec.stage_costs[t].value(t, &self.x[t], u);
            self.choice[t] = c;
            self.descend(t + 1, prefix + stage);
        }
    }
}

/// Feasible minimizer over grid control sequences and its cost. Needs a fixed
/// initial state and bounded control sets.
pub fn brute_force_oracle(spec: &OcpSpec, grid_step: f64) -> Result<(Trajectory, f64)> {
    spec.validate()?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidSpec(format!("grid step must be positive, got {grid_step}")));
    }
    let x0 = spec
        .fixed_x0()
        .ok_or_else(|| Error::Unsupported("the oracle needs a fixed initial state".into()))?
        .clone();
    let grids = (0..spec.horizon)
        .map(|t| control_grid(spec, t, grid_step))
        .collect::<Result<Vec<_>>>()?;
    let size: f64 = grids.iter().map(|g| g.len() as f64).product();
    if size > ORACLE_CAP {
        return Err(Error::SearchSpaceTooLarge { size, cap: ORACLE_CAP });
    }
    let mut search = Search {
        spec,
        grids,
        x: vec![x0; spec.horizon + 1],
        choice: vec![0; spec.horizon],
        diff: DVector::zeros(spec.control_dim),
        best: None,
    };
    search.descend(0, 0.0);
    let (cost, choice) = search
        .best
        .ok_or_else(|| Error::Inconsistent("no grid sequence is feasible".into()))?;
    let u: Vec<_> = choice.iter().enumerate().map(|(t, &c)| search.grids[t][c].clone()).collect();
    let traj = crate::ocp::rollout(spec, spec.fixed_x0().expect("checked above"), &u)?;
    Ok((traj, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{QuadraticCost, QuadraticTerminal, StageCost, TerminalCost};
    use crate::dynamics::StageDynamics;
    use crate::ocp::{total_cost, InitialState, StationaryData};
    use crate::sets::{ConvexSet, NormKind};
    use nalgebra::DMatrix;

    fn integrator(x0: f64, control_set: ConvexSet, rate: f64) -> OcpSpec {
        OcpSpec::time_invariant(
            2,
            StationaryData {
                dynamics: StageDynamics::linear(DMatrix::identity(1, 1), DMatrix::identity(1, 1)),
                stage_cost: StageCost::Quadratic(QuadraticCost::new(
                    DMatrix::from_element(1, 1, 2.0),
                    DMatrix::from_element(1, 1, 2.0),
                )),
                terminal_cost: TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::from_element(1, 1, 2.0))),
                state_set: ConvexSet::whole(1),
                control_set,
                rate_bound: rate,
                rate_norm: NormKind::Inf,
                initial: InitialState::Fixed(DVector::from_element(1, x0)),
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_rate_allows_only_constant_sequences() {
        let spec = integrator(1.0, ConvexSet::uniform_box(1, -1.0, 1.0).unwrap(), 0.0);
        let (traj, cost) = brute_force_oracle(&spec, 0.125).unwrap();
        assert_eq!(traj.u[0], traj.u[1]);
        // constant c: 1 + c² + (1+c)² + c² + (1+2c)², minimized at c = −3/8
        assert!((traj.u[0][0] + 0.375).abs() < 1e-12);
        assert!((cost - total_cost(&spec, &traj).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn singleton_controls_give_the_uncontrolled_rollout() {
        let spec = integrator(1.0, ConvexSet::zero(1), 2.0);
        let (traj, cost) = brute_force_oracle(&spec, 0.01).unwrap();
        assert!(traj.u.iter().all(|u| u[0] == 0.0));
        assert_eq!(cost, 3.0);
    }

    #[test]
    fn cap_is_enforced() {
        let mut spec = integrator(1.0, ConvexSet::uniform_box(1, -1.0, 1.0).unwrap(), 2.0);
        spec.control_sets[0] = ConvexSet::uniform_box(1, -1e9, 1e9).unwrap();
        assert!(matches!(brute_force_oracle(&spec, 0.01), Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn ties_resolve_to_the_smallest_sequence() {
        // zero cost: every sequence ties
        let mut spec = integrator(0.0, ConvexSet::uniform_box(1, -1.0, 1.0).unwrap(), 2.0);
        let zero = QuadraticCost::new(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1));
        spec.stage_costs = vec![StageCost::Quadratic(zero); 2];
        spec.terminal_cost = TerminalCost::Quadratic(QuadraticTerminal::new(DMatrix::zeros(1, 1)));
        let (traj, cost) = brute_force_oracle(&spec, 0.5).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(traj.u[0][0], -1.0);
        assert_eq!(traj.u[1][0], -1.0);
    }
}
