//! JSON documents and CSV outputs.
//!
//! Problem schema (matrices are row-major nested arrays, `null` in a bound or
//! rate entry means unbounded; per-step fields take one value for every step
//! or an explicit array):
//!
//! ```json
//! {
//!   "horizon": 30, "state_dim": 3, "control_dim": 1,
//!   "dynamics": {"type": "linear", "a": [[...]], "b": [[...]], "c": [...]},
//!   "stage_cost": {"type": "quadratic", "q": [[...]], "r": [[...]],
//!                  "state_linear": [...], "control_linear": [...], "offset": 0.0},
//!   "terminal_cost": {"type": "quadratic", "q": [[...]], "linear": [...], "offset": 0.0},
//!   "state_sets": {"type": "box", "lower": [...], "upper": [...]},
//!   "control_sets": {"type": "ball", "center": [0.0], "radius": 1.0, "norm": "inf"},
//!   "rate_bounds": 0.75,
//!   "rate_norm": "inf",
//!   "initial_state": {"mode": "fixed", "x0": [2.0, 2.0, 1.0]}
//! }
//! ```
//!
//! Other set types are `{"type": "singleton", "point": [...]}` and
//! `{"type": "whole", "dim": n}`; `"initial_state": {"mode": "free"}` lets
//! `x(0)` range over `state_sets[0]`. Quadratic costs are
//! `½xᵀQx + ½uᵀRu + qᵀx + rᵀu + offset`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificate::PmpCertificate;
use crate::cost::{QuadraticCost, QuadraticTerminal, StageCost, TerminalCost};
use crate::dynamics::StageDynamics;
use crate::error::{Error, Result};
use crate::experiment::ExperimentRecord;
use crate::ocp::{InitialState, OcpSpec, Trajectory};
use crate::sets::{ConvexSet, NormKind};

/// `DVector` as a JSON array.
pub mod dvector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// `Vec<DVector>` as an array of arrays.
pub mod vec_list {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[DVector<f64>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = v.iter().map(|e| e.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<f64>>, D::Error> {
        Ok(Vec::<Vec<f64>>::deserialize(d)?.into_iter().map(DVector::from_vec).collect())
    }
}

/// `Vec<Vec<DVector>>` as a three-level array.
pub mod nested_vec_list {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<DVector<f64>>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<&[f64]>> = v.iter().map(|c| c.iter().map(|e| e.as_slice()).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<DVector<f64>>>, D::Error> {
        Ok(Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .into_iter()
            .map(|c| c.into_iter().map(DVector::from_vec).collect())
            .collect())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PerStep<T> {
    Many(Vec<T>),
    One(T),
}

impl<T: Clone> PerStep<T> {
    fn expand(self, len: usize) -> Vec<T> {
        match self {
            PerStep::Many(v) => v,
            PerStep::One(x) => vec![x; len],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum SetDoc {
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_norm")]
        norm: NormKind,
    },
    Singleton {
        point: Vec<f64>,
    },
    Whole {
        dim: usize,
    },
}

fn default_norm() -> NormKind {
    NormKind::Inf
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum DynamicsDoc {
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum StageCostDoc {
    Quadratic {
        q: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state_linear: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_linear: Option<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum TerminalCostDoc {
    Quadratic {
        q: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
enum InitialDoc {
    Free,
    Fixed { x0: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    horizon: usize,
    state_dim: usize,
    control_dim: usize,
    dynamics: PerStep<DynamicsDoc>,
    stage_cost: PerStep<StageCostDoc>,
    terminal_cost: TerminalCostDoc,
    state_sets: PerStep<SetDoc>,
    control_sets: PerStep<SetDoc>,
    rate_bounds: PerStep<Option<f64>>,
    #[serde(default = "default_norm")]
    rate_norm: NormKind,
    initial_state: InitialDoc,
}

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::schema(format!("{path}[{i}]"), format!("expected {ncols} columns, got {}", r.len())));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn vector_or_zeros(v: Option<Vec<f64>>, len: usize) -> DVector<f64> {
    v.map_or_else(|| DVector::zeros(len), DVector::from_vec)
}

impl SetDoc {
    fn into_set(self, path: &str) -> Result<ConvexSet> {
        let set = match self {
            SetDoc::Box { lower, upper } => ConvexSet::Box {
                lower: DVector::from_iterator(lower.len(), lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY))),
                upper: DVector::from_iterator(upper.len(), upper.iter().map(|v| v.unwrap_or(f64::INFINITY))),
            },
            SetDoc::Ball { center, radius, norm } => ConvexSet::NormBall {
                center: DVector::from_vec(center),
                radius,
                norm,
            },
            SetDoc::Singleton { point } => ConvexSet::Singleton(DVector::from_vec(point)),
            SetDoc::Whole { dim } => ConvexSet::Whole(dim),
        };
        set.validate().map_err(|e| Error::schema(path, e.to_string()))?;
        Ok(set)
    }

    fn from_set(set: &ConvexSet) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        match set {
            ConvexSet::Box { lower, upper } => SetDoc::Box {
                lower: lower.iter().map(|&v| finite(v)).collect(),
                upper: upper.iter().map(|&v| finite(v)).collect(),
            },
            ConvexSet::NormBall { center, radius, norm } => SetDoc::Ball {
                center: center.iter().copied().collect(),
                radius: *radius,
                norm: *norm,
            },
            ConvexSet::Singleton(p) => SetDoc::Singleton {
                point: p.iter().copied().collect(),
            },
            ConvexSet::Whole(n) => SetDoc::Whole { dim: *n },
        }
    }
}

impl ProblemDoc {
    fn into_spec(self) -> Result<OcpSpec> {
        let (horizon, d, m) = (self.horizon, self.state_dim, self.control_dim);
        let dynamics = self
            .dynamics
            .expand(horizon)
            .into_iter()
            .enumerate()
            .map(|(t, doc)| {
                let DynamicsDoc::Linear { a, b, c } = doc;
                let path = format!("dynamics[{t}]");
                Ok(StageDynamics::Linear {
                    a: matrix(&a, &format!("{path}.a"))?,
                    b: matrix(&b, &format!("{path}.b"))?,
                    c: vector_or_zeros(c, d),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let stage_costs = self
            .stage_cost
            .expand(horizon)
            .into_iter()
            .enumerate()
            .map(|(t, doc)| {
                let StageCostDoc::Quadratic { q, r, state_linear, control_linear, offset } = doc;
                let path = format!("stage_cost[{t}]");
                Ok(StageCost::Quadratic(QuadraticCost {
                    q: matrix(&q, &format!("{path}.q"))?,
                    r: matrix(&r, &format!("{path}.r"))?,
                    state_linear: vector_or_zeros(state_linear, d),
                    control_linear: vector_or_zeros(control_linear, m),
                    offset,
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        let TerminalCostDoc::Quadratic { q, linear, offset } = self.terminal_cost;
        let terminal_cost = TerminalCost::Quadratic(QuadraticTerminal {
            q: matrix(&q, "terminal_cost.q")?,
            linear: vector_or_zeros(linear, d),
            offset,
        });
        let sets = |doc: PerStep<SetDoc>, len: usize, field: &str| -> Result<Vec<ConvexSet>> {
            doc.expand(len)
                .into_iter()
                .enumerate()
                .map(|(t, s)| s.into_set(&format!("{field}[{t}]")))
                .collect()
        };
        let spec = OcpSpec {
            horizon,
            state_dim: d,
            control_dim: m,
            dynamics,
            stage_costs,
            terminal_cost,
            state_sets: sets(self.state_sets, horizon + 1, "state_sets")?,
            control_sets: sets(self.control_sets, horizon, "control_sets")?,
            rate_bounds: self
                .rate_bounds
                .expand(horizon.saturating_sub(1))
                .into_iter()
                .map(|r| r.unwrap_or(f64::INFINITY))
                .collect(),
            rate_norm: self.rate_norm,
            initial: match self.initial_state {
                InitialDoc::Free => InitialState::Free,
                InitialDoc::Fixed { x0 } => InitialState::Fixed(DVector::from_vec(x0)),
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(spec: &OcpSpec) -> Result<Self> {
        let dynamics = spec
            .dynamics
            .iter()
            .map(|f| match f {
                StageDynamics::Linear { a, b, c } => Ok(DynamicsDoc::Linear {
                    a: rows_of(a),
                    b: rows_of(b),
                    c: Some(c.iter().copied().collect()),
                }),
                _ => Err(Error::Unsupported("only linear dynamics can be serialized".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let stage_cost = spec
            .stage_costs
            .iter()
            .map(|c| match c {
                StageCost::Quadratic(c) => Ok(StageCostDoc::Quadratic {
                    q: rows_of(&c.q),
                    r: rows_of(&c.r),
                    state_linear: Some(c.state_linear.iter().copied().collect()),
                    control_linear: Some(c.control_linear.iter().copied().collect()),
                    offset: c.offset,
                }),
                StageCost::General(_) => Err(Error::Unsupported("only quadratic costs can be serialized".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        let terminal_cost = match &spec.terminal_cost {
            TerminalCost::Quadratic(c) => TerminalCostDoc::Quadratic {
                q: rows_of(&c.q),
                linear: Some(c.linear.iter().copied().collect()),
                offset: c.offset,
            },
            TerminalCost::General(_) => {
                return Err(Error::Unsupported("only quadratic costs can be serialized".into()))
            }
        };
        Ok(ProblemDoc {
            horizon: spec.horizon,
            state_dim: spec.state_dim,
            control_dim: spec.control_dim,
            dynamics: PerStep::Many(dynamics),
            stage_cost: PerStep::Many(stage_cost),
            terminal_cost,
            state_sets: PerStep::Many(spec.state_sets.iter().map(SetDoc::from_set).collect()),
            control_sets: PerStep::Many(spec.control_sets.iter().map(SetDoc::from_set).collect()),
            rate_bounds: PerStep::Many(spec.rate_bounds.iter().map(|&r| r.is_finite().then_some(r)).collect()),
            rate_norm: spec.rate_norm,
            initial_state: match &spec.initial {
                InitialState::Free => InitialDoc::Free,
                InitialState::Fixed(x0) => InitialDoc::Fixed {
                    x0: x0.iter().copied().collect(),
                },
            },
        })
    }
}

/// Deserialize JSON text, reporting the failing field path.
fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })
}

pub fn parse_problem(text: &str) -> Result<OcpSpec> {
    from_json::<ProblemDoc>(text)?.into_spec()
}

pub fn problem_to_json(spec: &OcpSpec) -> Result<String> {
    let doc = ProblemDoc::from_spec(spec)?;
    Ok(serde_json::to_string_pretty(&doc).expect("problem documents serialize"))
}

pub fn load_problem(path: &Path) -> Result<OcpSpec> {
    parse_problem(&fs::read_to_string(path)?)
}

pub fn save_problem(spec: &OcpSpec, path: &Path) -> Result<()> {
    fs::write(path, problem_to_json(spec)?)?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    from_json(&fs::read_to_string(path)?)
}

pub fn load_certificate(path: &Path) -> Result<PmpCertificate> {
    from_json(&fs::read_to_string(path)?)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("documents serialize")
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value))?;
    Ok(())
}

/// Full round-trip precision, `.` decimal separator.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_table(prefix: &str, rows: &[DVector<f64>]) -> String {
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = String::from("t");
    for i in 1..=width {
        write!(out, ",{prefix}_{i}").expect("writing to a string");
    }
    out.push('\n');
    for (t, row) in rows.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row.iter() {
            out.push(',');
            out.push_str(&fmt_num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn states_csv(traj: &Trajectory) -> String {
    csv_table("x", &traj.x)
}

pub fn controls_csv(traj: &Trajectory) -> String {
    csv_table("u", &traj.u)
}

/// `|u(t+1) − u(t)|` for t = 0..T−2.
pub fn rates_csv(traj: &Trajectory) -> String {
    csv_table("abs_rate", &traj.rate_magnitudes())
}

/// Write `states.csv`, `controls.csv` and `rates.csv` with a file prefix.
pub fn write_trajectory_csvs(traj: &Trajectory, dir: &Path, prefix: &str) -> Result<()> {
    fs::write(dir.join(format!("{prefix}states.csv")), states_csv(traj))?;
    fs::write(dir.join(format!("{prefix}controls.csv")), controls_csv(traj))?;
    fs::write(dir.join(format!("{prefix}rates.csv")), rates_csv(traj))?;
    Ok(())
}

pub fn summary_text(record: &ExperimentRecord) -> String {
    let mut s = String::new();
    let x0: Vec<String> = record.x0.iter().map(|v| v.to_string()).collect();
    writeln!(s, "run: {}", record.name).unwrap();
    writeln!(s, "x0: ({})", x0.join(", ")).unwrap();
    let solver = &record.solver;
    writeln!(
        s,
        "solver: {:?} after {} iterations (primal {:.2e}, dual {:.2e}, polished {})",
        solver.status, solver.iterations, solver.primal_residual, solver.dual_residual, solver.polished
    )
    .unwrap();
    writeln!(s, "designed cost: {}", fmt_num(record.designed_cost)).unwrap();
    let max_rate = record.designed_rates.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    writeln!(s, "max |u(t+1) - u(t)|: {}", fmt_num(max_rate)).unwrap();
    writeln!(
        s,
        "rate bound hit at steps: {:?}",
        record.rate_active.iter().enumerate().filter(|(_, &a)| a).map(|(k, _)| k).collect::<Vec<_>>()
    )
    .unwrap();
    if let Some(n) = &record.naive {
        writeln!(s, "unconstrained design cost: {}", fmt_num(n.unconstrained_cost)).unwrap();
        writeln!(s, "clipped rollout cost ({:?}): {}", n.order, fmt_num(n.clipped_cost)).unwrap();
        writeln!(s, "clipped rollout state violation: {:.3e}", n.clipped_violation.state).unwrap();
    }
    if let Some(gap) = record.exact_max_gap {
        writeln!(s, "sampled Hamiltonian gap: {gap:.3e}").unwrap();
    }
    s.push('\n');
    if let Some(report) = &record.report {
        s.push_str(&report.to_string());
        s.push('\n');
    }
    s.push_str(&record.existence.to_string());
    s.push('\n');
    for c in &record.checks {
        writeln!(s, "[{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    s
}

/// Write the CSV tables, `report.json`, `summary.txt`, `trajectory.json` and,
/// when present, `certificate.json` and the `naive_*` tables.
pub fn write_outputs(record: &ExperimentRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory_csvs(&record.designed, dir, "")?;
    if let Some(n) = &record.naive {
        write_trajectory_csvs(&n.clipped, dir, "naive_")?;
        write_trajectory_csvs(&n.unconstrained, dir, "unconstrained_")?;
    }
    save_json(record, &dir.join("report.json"))?;
    save_json(&record.designed, &dir.join("trajectory.json"))?;
    if let Some(cert) = &record.certificate {
        save_json(cert, &dir.join("certificate.json"))?;
    }
    fs::write(dir.join("summary.txt"), summary_text(record))?;
    Ok(())
}
