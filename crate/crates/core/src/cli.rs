//! Command-line front end.
//!
//! ```text
//! flexocp solve    --problem fuller --eps-tol 1e-8 --mesh flexible
//! flexocp converge --problem fuller --a 1 --b 1 --n-list 5:60
//! flexocp pareto   --problem fuller --n 20 --eps-list 1e-11,1e-10,1e-9,1e-8,1e-7
//! ```
//!
//! Every command writes `report.json` to the output directory; `solve` adds
//! `trajectory.csv`, `converge` adds `convergence.csv` and `pareto` adds
//! `pareto.csv`. Exit codes: 0 on success, 2 when the residual tolerance was
//! not reached (outputs still written), 1 on configuration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::driver::{convergence_study, pareto_sweep, solve_ocp, NlpSettings, SolverConfig, Termination};
use crate::error::{Error, Result};
use crate::mesh::Trajectory;
use crate::nlp::HessianMode;
use crate::problems::{lookup, names};
use crate::transcription::MeshMode;

pub const OUT_DIR_ENV: &str = "FLEXOCP_OUT_DIR";
pub const TRAJECTORY_SAMPLES: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "flexocp", version, about = "Integrated-residual optimal control on a flexible time mesh")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine until the residual tolerance is met, then minimize the cost.
    Solve(CommonArgs),
    /// Minimum residual against the number of intervals, for both mesh modes.
    Converge(ConvergeArgs),
    /// Cost against residual tolerance at a fixed number of intervals.
    Pareto(ParetoArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeshArg {
    Flexible,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HessianArg {
    Exact,
    Bfgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Registry problem name.
    #[arg(long, default_value = "fuller")]
    pub problem: String,
    /// Initial number of intervals.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// State polynomial degree.
    #[arg(long, default_value_t = 2)]
    pub a: usize,
    /// Input polynomial degree.
    #[arg(long, default_value_t = 1)]
    pub b: usize,
    /// Gauss-Legendre quadrature order.
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    /// Interval length flexibility, in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    pub flex: f64,
    /// Integrated-residual tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_tol: f64,
    /// Quadrature error gate [default: 1e-2 * eps-tol].
    #[arg(long)]
    pub eps_quad_tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = MeshArg::Flexible)]
    pub mesh: MeshArg,
    /// Factor applied to N on refinement.
    #[arg(long, default_value_t = 2)]
    pub n_growth: usize,
    /// Factor applied to Q on refinement.
    #[arg(long, default_value_t = 2)]
    pub q_growth: usize,
    /// Refinements allowed after the first solve.
    #[arg(long, default_value_t = 8)]
    pub max_rounds: usize,
    /// NLP optimality tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub nlp_tol: f64,
    #[arg(long, default_value_t = 3000)]
    pub nlp_max_iter: usize,
    #[arg(long, value_enum, default_value_t = HessianArg::Exact)]
    pub hessian: HessianArg,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "flexocp-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Interval counts: `a:b` doubles from a, capped at b; or a comma list.
    #[arg(long, default_value = "5:60", value_parser = parse_n_list)]
    pub n_list: NList,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated residual tolerances.
    #[arg(long, default_value = "1e-11,3e-11,1e-10,1e-9,1e-8,1e-7", value_parser = parse_eps_list)]
    pub eps_list: EpsList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NList(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct EpsList(pub Vec<f64>);

/// Parses `a:b` (doubling from `a`, capped at `b`) or `n1,n2,...`.
pub fn parse_n_list(s: &str) -> std::result::Result<NList, String> {
    let int = |v: &str| -> std::result::Result<usize, String> {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("`{v}` is not a positive integer")),
        }
    };
    if let Some((lo, hi)) = s.split_once(':') {
        let (lo, hi) = (int(lo)?, int(hi)?);
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        let mut out = vec![lo];
        let mut n = lo;
        while n < hi {
            n = (2 * n).min(hi);
            out.push(n);
        }
        Ok(NList(out))
    } else {
        s.split(',').map(int).collect::<std::result::Result<_, _>>().map(NList)
    }
}

pub fn parse_eps_list(s: &str) -> std::result::Result<EpsList, String> {
    s.split(',')
        .map(|v| match v.trim().parse::<f64>() {
            Ok(e) if e > 0.0 && e.is_finite() => Ok(e),
            _ => Err(format!("`{v}` is not a positive number")),
        })
        .collect::<std::result::Result<_, _>>()
        .map(EpsList)
}

impl CommonArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            eps_tol: self.eps_tol,
            eps_quad_tol: self.eps_quad_tol,
            n_intervals: self.n,
            state_degree: self.a,
            input_degree: self.b,
            quad_order: self.q,
            flexibility: self.flex,
            mesh_mode: match self.mesh {
                MeshArg::Flexible => MeshMode::Flexible,
                MeshArg::Fixed => MeshMode::Fixed,
            },
            n_growth: self.n_growth,
            q_growth: self.q_growth,
            max_rounds: self.max_rounds,
            nlp: NlpSettings {
                tol: self.nlp_tol,
                max_iter: self.nlp_max_iter,
                hessian: match self.hessian {
                    HessianArg::Exact => HessianMode::Exact,
                    HessianArg::Bfgs => HessianMode::Bfgs,
                },
                ..NlpSettings::default()
            },
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(Termination::Success) => 0,
        Ok(Termination::ToleranceNotReached) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command, writing its outputs.
pub fn execute(cli: &Cli) -> Result<Termination> {
    match &cli.command {
        Command::Solve(c) => run_solve(c),
        Command::Converge(c) => run_converge(c),
        Command::Pareto(c) => run_pareto(c),
    }
}

fn prepare(common: &CommonArgs) -> Result<(crate::problems::BenchmarkEntry, SolverConfig)> {
    let entry = lookup(&common.problem).map_err(|_| {
        Error::Config(format!(
            "--problem: unknown problem `{}` (available: {})",
            common.problem,
            names().join(", ")
        ))
    })?;
    let config = common.config();
    config.validate()?;
    fs::create_dir_all(&common.out)?;
    Ok((entry, config))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    problem: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_cost: Option<f64>,
    config: &'a SolverConfig,
    #[serde(flatten)]
    body: &'a T,
}

fn write_report<T: Serialize>(dir: &Path, envelope: &Envelope<'_, T>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(envelope)?;
    s.push('\n');
    fs::write(dir.join("report.json"), s)?;
    Ok(())
}

fn run_solve(common: &CommonArgs) -> Result<Termination> {
    let (entry, config) = prepare(common)?;
    let report = solve_ocp(&entry.problem, &config)?;
    write_report(
        &common.out,
        &Envelope {
            command: "solve",
            problem: entry.name,
            reference_cost: entry.reference_cost.as_ref().map(|r| r.value),
            config: &config,
            body: &report,
        },
    )?;
    fs::write(
        common.out.join("trajectory.csv"),
        trajectory_csv(&report.solution.trajectory, report.solution.n_x, report.solution.n_u),
    )?;
    println!(
        "{}: {:?}, N={}, Q={}, eps_r={:e}, cost={}",
        entry.name,
        report.termination,
        report.solution.trajectory.n_intervals(),
        report.quad_order,
        report.eps_r,
        report.cost
    );
    Ok(report.termination)
}

fn run_converge(args: &ConvergeArgs) -> Result<Termination> {
    let (entry, config) = prepare(&args.common)?;
    let study = convergence_study(&entry.problem, &config, &args.n_list.0)?;
    write_report(
        &args.common.out,
        &Envelope {
            command: "converge",
            problem: entry.name,
            reference_cost: None,
            config: &config,
            body: &study,
        },
    )?;
    let mut csv = String::from("mode,n_intervals,eps_r,status,iterations\n");
    for r in &study.rows {
        let mode = match r.mode {
            MeshMode::Flexible => "flexible",
            MeshMode::Fixed => "fixed",
        };
        let _ = writeln!(csv, "{mode},{},{:e},{:?},{}", r.n_intervals, r.eps_r, r.status, r.iterations);
    }
    fs::write(args.common.out.join("convergence.csv"), csv)?;
    println!(
        "{}: slope flexible {:?}, fixed {:?}",
        entry.name, study.flexible_slope, study.fixed_slope
    );
    Ok(Termination::Success)
}

fn run_pareto(args: &ParetoArgs) -> Result<Termination> {
    let (entry, config) = prepare(&args.common)?;
    let sweep = pareto_sweep(&entry.problem, &config, &args.eps_list.0)?;
    write_report(
        &args.common.out,
        &Envelope {
            command: "pareto",
            problem: entry.name,
            reference_cost: entry.reference_cost.as_ref().map(|r| r.value),
            config: &config,
            body: &sweep,
        },
    )?;
    let mut csv = String::from("eps_tol,eps_r,cost,status,iterations\n");
    for p in &sweep.points {
        let _ = writeln!(csv, "{:e},{:e},{},{:?},{}", p.eps_tol, p.eps_r, p.cost, p.status, p.iterations);
    }
    fs::write(args.common.out.join("pareto.csv"), csv)?;
    println!("{}: {} points", entry.name, sweep.points.len());
    Ok(Termination::Success)
}

/// Sample times: `TRAJECTORY_SAMPLES` uniform times plus every mesh node,
/// sorted; a uniform time within rounding of a node is replaced by it.
pub fn sample_times(nodes: &[f64]) -> Vec<(f64, bool)> {
    let (t0, tf) = (nodes[0], nodes[nodes.len() - 1]);
    let tol = 1e-12 * (tf - t0).abs().max(1.0);
    let mut out: Vec<(f64, bool)> = nodes.iter().map(|&t| (t, true)).collect();
    for k in 0..TRAJECTORY_SAMPLES {
        let t = t0 + (tf - t0) * k as f64 / (TRAJECTORY_SAMPLES - 1) as f64;
        let near = nodes.partition_point(|&x| x < t - tol);
        if near < nodes.len() && (nodes[near] - t).abs() <= tol {
            continue;
        }
        out.push((t, false));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `t, x_1.., u_1.., node` rows. Inputs at a node take the value of the
/// interval starting there.
pub fn trajectory_csv(traj: &Trajectory, n_x: usize, n_u: usize) -> String {
    let mut s = String::from("t");
    for k in 1..=n_x {
        let _ = write!(s, ",x_{k}");
    }
    for k in 1..=n_u {
        let _ = write!(s, ",u_{k}");
    }
    s.push_str(",node\n");
    for (t, node) in sample_times(&traj.nodes) {
        let _ = write!(s, "{t:e}");
        for v in traj.state_at(t) {
            let _ = write!(s, ",{v:e}");
        }
        if n_u > 0 {
            for v in traj.input_at(t) {
                let _ = write!(s, ",{v:e}");
            }
        }
        let _ = writeln!(s, ",{node}");
    }
    s
}
