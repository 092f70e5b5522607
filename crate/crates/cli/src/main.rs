//! `ratepmp` command-line tool.
//!
//! Exit codes: 0 every check passed, 2 a certificate, constraint or
//! consistency check failed, 1 usage, input or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DVector;

use ratepmp::experiment::{self, ClipOrder, ExperimentRecord, RunOptions};
use ratepmp::io::{self, load_certificate, load_problem, load_trajectory};
use ratepmp::lifting::{build_rate_matrix, f12, f21, lifted_cost_equivalence};
use ratepmp::qp::oracle::brute_force_oracle;
use ratepmp::qp::transcribe::{transcribe, transcribe_lifted};
use ratepmp::{check_certificate, solve, solve_ocp, total_cost, Error, InitialState, OcpSpec, QpSettings, QpStatus, YSetReading};

/// Agreement required between the original and lifted QP optima.
const LIFT_COST_TOL: f64 = 1e-6;
/// Amount by which the QP optimum may exceed the grid optimum.
const ORACLE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "ratepmp", version, about = "Rate-constrained optimal control: solve, certify, compare")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SolveOpts {
    /// Directory for CSV, JSON and summary outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long = "eps-qp", default_value_t = QpSettings::default().eps)]
    eps_qp: f64,
    /// Fixed initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Seed of the sampled maximization check.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and check the recovered certificate.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Solve the built-in benchmark (default x0 = 2,2,1).
    PaperExample {
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Compare the rate-aware design with the clipped unconstrained design.
    NaiveClip {
        problem: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
        /// Apply the rate limit before the magnitude limit.
        #[arg(long)]
        rate_first: bool,
        /// Control applied before t = 0, comma separated; zero by default.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u_prev: Option<Vec<f64>>,
    },
    /// Check a trajectory and certificate against a problem.
    Verify {
        problem: PathBuf,
        trajectory: PathBuf,
        certificate: PathBuf,
    },
    /// Exhaustive grid search over control sequences.
    Oracle {
        problem: PathBuf,
        #[arg(long)]
        grid: f64,
    },
    /// Check the lifting maps, the rate matrices and lifted QP equivalence.
    LiftCheck { problem: PathBuf },
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotOptimal(_) | Error::Inconsistent(_) | Error::InconsistentLift { .. } => {
                Failure::Check(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Read an input file, naming it in the error.
fn read<T>(path: &Path, load: fn(&Path) -> ratepmp::Result<T>) -> Result<T, Failure> {
    load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn init_logging() {
    let level = match std::env::var("RATEPMP_LOG").as_deref() {
        Ok("quiet") => "off",
        Ok("info") => "info",
        Ok("debug") => "debug",
        _ => "warn",
    };
    env_logger::Builder::new().parse_filters(level).format_timestamp(None).init();
}

fn settings(opts: &SolveOpts) -> Result<QpSettings, Failure> {
    let s = QpSettings {
        eps: opts.eps_qp,
        ..QpSettings::default()
    };
    s.validate()?;
    Ok(s)
}

fn with_x0(spec: OcpSpec, x0: &Option<Vec<f64>>) -> Result<OcpSpec, Failure> {
    match x0 {
        None => Ok(spec),
        Some(v) => Ok(spec.with_initial(InitialState::Fixed(DVector::from_vec(v.clone())))?),
    }
}

fn run_options(opts: &SolveOpts) -> Result<RunOptions, Failure> {
    Ok(RunOptions {
        settings: settings(opts)?,
        seed: opts.seed,
        ..RunOptions::default()
    })
}

/// Print, optionally write, and turn the named checks into an exit status.
fn finish(record: &ExperimentRecord, out: &Option<PathBuf>, gating: &[&str]) -> Outcome {
    print!("{}", io::summary_text(record));
    if let Some(dir) = out {
        io::write_outputs(record, dir)?;
        info!("outputs written to {}", dir.display());
    }
    let failed: Vec<&str> = record
        .checks
        .iter()
        .filter(|c| !c.pass && gating.contains(&c.name.as_str()))
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

const DESIGN_CHECKS: [&str; 3] = ["constraints", "certificate", "exact-maximization"];

fn cmd_solve(problem: &Path, opts: &SolveOpts) -> Outcome {
    let spec = with_x0(read(problem, load_problem)?, &opts.x0)?;
    let record = experiment::run_design("solve", &spec, &run_options(opts)?)?;
    finish(&record, &opts.out, &DESIGN_CHECKS)
}

fn cmd_paper_example(opts: &SolveOpts) -> Outcome {
    let x0 = DVector::from_vec(opts.x0.clone().unwrap_or(experiment::DEFAULT_X0.to_vec()));
    let record = experiment::run_paper_example(&x0, &run_options(opts)?)?;
    finish(&record, &opts.out, &["constraints", "rate-activity", "certificate", "exact-maximization"])
}

fn cmd_naive(problem: &Path, opts: &SolveOpts, rate_first: bool, u_prev: &Option<Vec<f64>>) -> Outcome {
    let spec = with_x0(read(problem, load_problem)?, &opts.x0)?;
    let run = RunOptions {
        order: if rate_first { ClipOrder::RateFirst } else { ClipOrder::MagnitudeFirst },
        u_prev_init: u_prev.clone().map(DVector::from_vec),
        ..run_options(opts)?
    };
    let record = experiment::run_naive_on("naive-clip", &spec, &run)?;
    finish(
        &record,
        &opts.out,
        &["constraints", "certificate", "exact-maximization", "clipped-bounds", "cost-ordering"],
    )
}

fn cmd_verify(problem: &Path, trajectory: &Path, certificate: &Path) -> Outcome {
    let spec = read(problem, load_problem)?;
    let traj = read(trajectory, load_trajectory)?;
    let cert = read(certificate, load_certificate)?;
    let report = check_certificate(&spec, &traj, &cert)?;
    println!("{report}");
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Check("certificate check failed".into()))
    }
}

fn cmd_oracle(problem: &Path, grid: f64) -> Outcome {
    let spec = read(problem, load_problem)?;
    let (traj, grid_cost) = brute_force_oracle(&spec, grid)?;
    println!("grid step: {grid}");
    println!("grid optimum: {}", io::fmt_num(grid_cost));
    let controls: Vec<String> = traj.u.iter().map(|u| format!("{:?}", u.as_slice())).collect();
    println!("grid controls: {}", controls.join(" "));
    if !spec.is_linear_quadratic() {
        return Ok(());
    }
    let (qp_traj, _, _) = solve_ocp(&spec, &QpSettings::default())?;
    let qp_cost = total_cost(&spec, &qp_traj)?;
    println!("QP optimum: {}", io::fmt_num(qp_cost));
    println!("grid - QP: {:.3e}", grid_cost - qp_cost);
    if qp_cost > grid_cost + ORACLE_TOL {
        return Err(Failure::Check(format!("QP optimum exceeds the grid optimum by {:.3e}", qp_cost - grid_cost)));
    }
    Ok(())
}

fn cmd_lift_check(problem: &Path) -> Outcome {
    let spec = read(problem, load_problem)?;
    let settings = QpSettings::default();
    let plain = transcribe(&spec)?;
    let sol = solve(&plain.qp, &settings)?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::NotOptimal(sol.status).into());
    }
    let traj = plain.unpack(&sol.z);

    let back = f21(&spec, &f12(&spec, &traj)?)?;
    let bitwise = back == traj;
    println!("round trip of the optimum through the lift: {}", if bitwise { "identical" } else { "DIFFERS" });

    let mut dets_ok = true;
    for k in 0..spec.horizon - 1 {
        let det = build_rate_matrix(k, spec.horizon, spec.control_dim)?.determinant();
        dets_ok &= det == 1.0;
    }
    println!("rate matrix determinants all 1: {dets_ok}");

    let (orig, lifted) = lifted_cost_equivalence(&spec, &traj)?;
    println!("objective on the optimum: original {}, lifted {}", io::fmt_num(orig), io::fmt_num(lifted));

    let lifted_qp = transcribe_lifted(&spec, YSetReading::default())?;
    let lifted_sol = solve(&lifted_qp.qp, &settings)?;
    if lifted_sol.status != QpStatus::Optimal {
        return Err(Error::NotOptimal(lifted_sol.status).into());
    }
    let gap = (sol.objective - lifted_sol.objective).abs();
    println!(
        "QP optima: original {}, lifted {} (difference {gap:.3e})",
        io::fmt_num(sol.objective),
        io::fmt_num(lifted_sol.objective)
    );
    if bitwise && dets_ok && orig == lifted && gap <= LIFT_COST_TOL {
        Ok(())
    } else {
        Err(Failure::Check("lifting checks failed".into()))
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Solve { problem, opts } => cmd_solve(problem, opts),
        Command::PaperExample { opts } => cmd_paper_example(opts),
        Command::NaiveClip {
            problem,
            opts,
            rate_first,
            u_prev,
        } => cmd_naive(problem, opts, *rate_first, u_prev),
        Command::Verify {
            problem,
            trajectory,
            certificate,
        } => cmd_verify(problem, trajectory, certificate),
        Command::Oracle { problem, grid } => cmd_oracle(problem, *grid),
        Command::LiftCheck { problem } => cmd_lift_check(problem),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
