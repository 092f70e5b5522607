//! Python bindings: problems, trajectories, certificates and the main checks.
//!
//! Vectors cross the boundary as lists of floats, sequences of vectors as
//! lists of lists.

use nalgebra::DVector;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ratepmp::experiment::{self, ClipOrder, RunOptions};
use ratepmp::lifting;
use ratepmp::qp::oracle;
use ratepmp::{io, Error, OcpSpec, QpSettings};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::NotOptimal(_) | Error::Inconsistent(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn vecs(v: &[DVector<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|e| e.iter().copied().collect()).collect()
}

fn dvecs(v: Vec<Vec<f64>>) -> Vec<DVector<f64>> {
    v.into_iter().map(DVector::from_vec).collect()
}

/// An optimal control problem.
#[pyclass(name = "Problem", module = "ratepmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    spec: OcpSpec,
}

#[pymethods]
impl PyProblem {
    /// Parse the JSON problem schema.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyProblem {
            spec: io::parse_problem(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyProblem {
            spec: io::load_problem(&path).map_err(to_py)?,
        })
    }

    /// Rotation-plus-integrator benchmark, 30 steps, `|u| ≤ 1`, `|Δu| ≤ 0.75`.
    #[staticmethod]
    #[pyo3(signature = (x0 = None, angle = None))]
    fn benchmark(x0: Option<Vec<f64>>, angle: Option<f64>) -> PyResult<Self> {
        let x0 = DVector::from_vec(x0.unwrap_or(experiment::DEFAULT_X0.to_vec()));
        let spec = match angle {
            Some(a) => experiment::paper_problem_with_angle(&x0, a),
            None => experiment::paper_problem(&x0),
        }
        .map_err(to_py)?;
        Ok(PyProblem { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        io::problem_to_json(&self.spec).map_err(to_py)
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.spec.state_dim
    }

    #[getter]
    fn control_dim(&self) -> usize {
        self.spec.control_dim
    }

    /// `R_0..R_{T−2}`; `inf` where unbounded.
    #[getter]
    fn rate_bounds(&self) -> Vec<f64> {
        self.spec.rate_bounds.clone()
    }

    /// States from `x0` under the given controls.
    fn rollout(&self, x0: Vec<f64>, u: Vec<Vec<f64>>) -> PyResult<PyTrajectory> {
        let traj = ratepmp::rollout(&self.spec, &DVector::from_vec(x0), &dvecs(u)).map_err(to_py)?;
        Ok(PyTrajectory { traj })
    }

    fn cost(&self, traj: &PyTrajectory) -> PyResult<f64> {
        ratepmp::total_cost(&self.spec, &traj.traj).map_err(to_py)
    }

    /// Route verdicts of the existence diagnostics.
    fn existence(&self) -> (String, String) {
        let r = ratepmp::check_existence(&self.spec);
        (r.route_a.to_string(), r.route_b.to_string())
    }
}

#[pyclass(name = "Trajectory", module = "ratepmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    traj: ratepmp::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[new]
    fn new(x: Vec<Vec<f64>>, u: Vec<Vec<f64>>) -> Self {
        PyTrajectory {
            traj: ratepmp::Trajectory { x: dvecs(x), u: dvecs(u) },
        }
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        vecs(&self.traj.x)
    }

    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        vecs(&self.traj.u)
    }

    /// `|u(t+1) − u(t)|` componentwise.
    fn rates(&self) -> Vec<Vec<f64>> {
        vecs(&self.traj.rate_magnitudes())
    }

    fn to_json(&self) -> String {
        io::to_json(&self.traj)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let traj = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyTrajectory { traj })
    }

    /// Rate states `y[k][t]` of the lifted problem.
    fn lift(&self, problem: &PyProblem) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let ext = lifting::lift_trajectory(&problem.spec, &self.traj).map_err(to_py)?;
        Ok(ext.y.iter().map(|c| vecs(c)).collect())
    }
}

#[pyclass(name = "Certificate", module = "ratepmp", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCertificate {
    cert: ratepmp::PmpCertificate,
}

#[pymethods]
impl PyCertificate {
    #[getter]
    fn psi0(&self) -> f64 {
        self.cert.psi0
    }

    /// `η_f(t)` for t = −1..T−1.
    #[getter]
    fn eta_f(&self) -> Vec<Vec<f64>> {
        vecs(&self.cert.eta_f)
    }

    #[getter]
    fn eta_x(&self) -> Vec<Vec<f64>> {
        vecs(&self.cert.eta_x)
    }

    fn scaled(&self, factor: f64) -> Self {
        PyCertificate {
            cert: self.cert.scaled(factor),
        }
    }

    fn to_json(&self) -> String {
        io::to_json(&self.cert)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cert = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyCertificate { cert })
    }
}

#[pyclass(name = "Report", module = "ratepmp", frozen, skip_from_py_object)]
struct PyReport {
    report: ratepmp::ResidualReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn passed(&self) -> bool {
        self.report.pass
    }

    /// Residuals that enter the verdict, by name.
    fn residuals(&self) -> Vec<(&'static str, f64)> {
        let r = &self.report;
        vec![
            ("r_state_dyn", r.r_state_dyn),
            ("r_adjoint", r.r_adjoint),
            ("r_chain", r.r_chain),
            ("r_transversality", r.r_transversality),
            ("r_hmax", r.r_hmax),
            ("r_nontriv", r.r_nontriv),
            ("r_sign", r.r_sign),
            ("r_feasibility", r.r_feasibility),
        ]
    }

    fn to_json(&self) -> String {
        io::to_json(&self.report)
    }

    fn __str__(&self) -> String {
        self.report.to_string()
    }
}

/// Solve a linear-quadratic problem; returns the trajectory, the recovered
/// certificate and the solver status.
#[pyfunction]
#[pyo3(signature = (problem, eps = None))]
fn solve(problem: &PyProblem, eps: Option<f64>) -> PyResult<(PyTrajectory, PyCertificate, String)> {
    let mut settings = QpSettings::default();
    if let Some(e) = eps {
        settings.eps = e;
    }
    let (traj, sol, rq) = ratepmp::solve_ocp(&problem.spec, &settings).map_err(to_py)?;
    let cert = ratepmp::recover_multipliers(&rq, &sol).map_err(to_py)?;
    Ok((PyTrajectory { traj }, PyCertificate { cert }, format!("{:?}", sol.status)))
}

#[pyfunction]
fn check_certificate(problem: &PyProblem, traj: &PyTrajectory, cert: &PyCertificate) -> PyResult<PyReport> {
    let report = ratepmp::check_certificate(&problem.spec, &traj.traj, &cert.cert).map_err(to_py)?;
    Ok(PyReport { report })
}

/// Largest sampled Hamiltonian excess over the candidate control.
#[pyfunction]
#[pyo3(signature = (problem, traj, cert, samples = 1000, seed = 0))]
fn exact_max_check(
    problem: &PyProblem,
    traj: &PyTrajectory,
    cert: &PyCertificate,
    samples: usize,
    seed: u64,
) -> PyResult<f64> {
    ratepmp::exact_max_check(&problem.spec, &traj.traj, &cert.cert, samples, seed).map_err(to_py)
}

/// Saturate then slew-limit (or the reverse with `rate_first`) a control sequence.
#[pyfunction]
#[pyo3(signature = (u, lower, upper, rate, u_prev = None, rate_first = false))]
fn naive_clip(
    u: Vec<Vec<f64>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rate: f64,
    u_prev: Option<Vec<f64>>,
    rate_first: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let set = ratepmp::ConvexSet::from_bounds(&lower, &upper).map_err(to_py)?;
    let prev = DVector::from_vec(u_prev.unwrap_or_else(|| vec![0.0; lower.len()]));
    let order = if rate_first { ClipOrder::RateFirst } else { ClipOrder::MagnitudeFirst };
    let out = experiment::naive_clip(&dvecs(u), &set, rate, &prev, order).map_err(to_py)?;
    Ok(vecs(&out))
}

/// Cost of the rate-aware design and of the clipped unconstrained design.
#[pyfunction]
fn naive_experiment(problem: &PyProblem) -> PyResult<(f64, f64)> {
    let opts = RunOptions {
        certify: false,
        ..RunOptions::default()
    };
    let rec = experiment::run_naive_on("naive-clip", &problem.spec, &opts).map_err(to_py)?;
    let naive = rec.naive.expect("naive record is filled in");
    Ok((rec.designed_cost, naive.clipped_cost))
}

/// Grid-search minimizer and its cost.
#[pyfunction]
fn brute_force_oracle(problem: &PyProblem, grid: f64) -> PyResult<(PyTrajectory, f64)> {
    let (traj, cost) = oracle::brute_force_oracle(&problem.spec, grid).map_err(to_py)?;
    Ok((PyTrajectory { traj }, cost))
}

/// Rate matrix `A_k` as a list of rows.
#[pyfunction]
fn rate_matrix(k: usize, horizon: usize, control_dim: usize) -> PyResult<Vec<Vec<f64>>> {
    let a = lifting::build_rate_matrix(k, horizon, control_dim).map_err(to_py)?;
    Ok(a.row_iter().map(|r| r.iter().copied().collect()).collect())
}

#[pymodule(name = "ratepmp")]
fn ratepmp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyCertificate>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(check_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_max_check, m)?)?;
    m.add_function(wrap_pyfunction!(naive_clip, m)?)?;
    m.add_function(wrap_pyfunction!(naive_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(rate_matrix, m)?)?;
    Ok(())
}
