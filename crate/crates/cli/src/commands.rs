use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use svi::geometry::Vector;
use svi::increase::{estimate_bound, global_infimum, Mode, PointSampling, SamplingConfig};
use svi::parametric::{continuity_report, sweep, sweep_cold, write_csv, Column, SweepTable};
use svi::problem_file::{example, ProblemFile, EXAMPLE_NAMES};
use svi::sampling::linspace;
use svi::setmaps::SviProblem;
use svi::solver::{default_alpha, solve, SolverConfig};
use svi::vopt::{
    brute_force_ideal, estimate_alpha_lower, ideal_value_sweep, IdealStatus, Objective, VopConfig,
    VopSpec,
};

/// Bad flags or flag combinations detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "svi", version, about = "Caristi-descent solver for parametric set-valued inclusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the inclusion (or find an ideal point) at one parameter value.
    Solve(SolveArgs),
    /// Solve along a parameter grid and write a CSV table.
    Sweep(SweepArgs),
    /// Bracket the increase (or decrease) bound at a point.
    EstimateInc(EstimateArgs),
    /// Ideal efficient points and values along a grid.
    Vopt(VoptArgs),
    /// Run the geometry and merit property checks against a problem.
    VerifyProps(VerifyArgs),
    /// Write a bundled example problem file.
    Example(ExampleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Starting point, comma separated (default: origin).
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub x0: Option<Coords>,
    /// Descent constant alpha (default: derived from the problem).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Merit tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for every randomized component.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rotation orientation of rotation objectives (overrides the file).
    #[arg(long, value_enum)]
    pub orientation: Option<Orientation>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Clockwise,
    Counterclockwise,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    /// Increase bound of the unconstrained map for constrained problems
    /// (default: declared or estimated).
    #[arg(long)]
    pub alpha_tilde: Option<f64>,
    /// Lipschitz constant of the merit off the constraint (default: the
    /// problem's perturbation budget).
    #[arg(long)]
    pub ell: Option<f64>,
    /// Lower decrease bound of the objective (optimization problems).
    #[arg(long)]
    pub alpha_lower: Option<f64>,
    /// Oracle grid density used to certify an empty ideal set.
    #[arg(long)]
    pub oracle_density: Option<usize>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid `start:stop:count`, endpoints included.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    /// Start every row from x0 instead of the previous solution.
    #[arg(long)]
    pub cold: bool,
    #[arg(long)]
    pub alpha_tilde: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    /// Threads for cold sweeps (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub p: f64,
    #[arg(long, value_enum, default_value = "increase")]
    pub mode: ModeArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ModeArg {
    Increase,
    Decrease,
}

#[derive(Args, Debug)]
pub struct VoptArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Grid,
    /// Lower decrease bound of the objective (default: estimated on the grid).
    #[arg(long)]
    pub alpha_lower: Option<f64>,
    /// Grid density of the brute-force oracle; adds an oracle_status column.
    #[arg(long)]
    pub oracle_density: Option<usize>,
    /// Threads for the oracle rows (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Parameter values checked, as a grid.
    #[arg(long, value_parser = parse_grid, default_value = "0:6.283185307179586:9")]
    pub grid: Grid,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ExampleArgs {
    /// Example name; `--list` shows them.
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Comma-separated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

/// Parameter values from `start:stop:count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

pub fn parse_vector(s: &str) -> Result<Coords, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
        .collect::<Result<_, _>>()
        .map(Coords)
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(format!("grid must be start:stop:count, got '{s}'"));
    };
    let start: f64 = start.parse().map_err(|e| format!("bad grid start: {e}"))?;
    let stop: f64 = stop.parse().map_err(|e| format!("bad grid stop: {e}"))?;
    let count: usize = count.parse().map_err(|e| format!("bad grid count: {e}"))?;
    if count == 0 || !(stop >= start) {
        return Err("grid needs count >= 1 and stop >= start".into());
    }
    Ok(Grid(if count == 1 { vec![start] } else { linspace(start, stop, count) }))
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::EstimateInc(a) => cmd_estimate(a),
        Command::Vopt(a) => cmd_vopt(a),
        Command::VerifyProps(a) => crate::props::run(&a.problem, &a.grid.0, a.seed),
        Command::Example(a) => cmd_example(a),
    }
}

pub fn load(path: &Path) -> Result<ProblemFile> {
    if !path.exists() {
        return Err(usage(format!("problem file {} does not exist", path.display())));
    }
    Ok(ProblemFile::load(path)?)
}

fn load_with(common: &Common) -> Result<ProblemFile> {
    let mut file = load(&common.problem)?;
    if let (Some(o), ProblemFile::Vop(spec)) = (common.orientation, &mut file) {
        match &mut spec.objective {
            Objective::LinearRotation { clockwise, .. } => *clockwise = o == Orientation::Clockwise,
            _ => return Err(usage("--orientation applies only to rotation objectives")),
        }
    }
    Ok(file)
}

fn start_point(common: &Common, n: usize) -> Result<Vector> {
    match &common.x0 {
        Some(Coords(v)) if v.len() != n => Err(usage(format!("--x0 has {} coordinates, the problem needs {n}", v.len()))),
        Some(Coords(v)) => Ok(Vector::from_column_slice(v)),
        None => Ok(Vector::zeros(n)),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn sampling_cfg(seed: u64) -> SamplingConfig {
    SamplingConfig {
        seed,
        ..SamplingConfig::default()
    }
}

/// Increase bound of the problem: declared, or a sampled infimum over `grid`.
fn alpha_estimate(problem: &SviProblem, grid: &[f64], seed: u64) -> Result<f64> {
    if let Some(a) = problem.declared_alpha {
        return Ok(a);
    }
    let n = problem.input_dim();
    let points = PointSampling {
        lower: vec![-2.0; n],
        upper: vec![2.0; n],
        count: 16,
    };
    let est = global_infimum(problem, grid, &points, &sampling_cfg(seed), Mode::Increase, false)?;
    log::info!("estimated increase bound {:.6} from {} samples", est.value, est.samples);
    Ok(est.value)
}

fn solver_cfg(
    problem: &SviProblem,
    common: &Common,
    grid: &[f64],
    alpha_tilde: Option<f64>,
    ell: Option<f64>,
) -> Result<SolverConfig> {
    let mut cfg = if problem.constraint.is_all_space() {
        let alpha = match common.alpha {
            Some(a) => a,
            None => default_alpha(alpha_estimate(problem, grid, common.seed)?),
        };
        SolverConfig {
            alpha,
            ..SolverConfig::default()
        }
    } else {
        let tilde = match alpha_tilde {
            Some(a) => a,
            None => alpha_estimate(problem, grid, common.seed)?,
        };
        let ell = ell.unwrap_or(problem.lipschitz_budget().ell_total);
        let mut cfg = SolverConfig::constrained(tilde, ell)?;
        if let Some(a) = common.alpha {
            cfg.alpha = a;
        }
        cfg
    };
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    cfg.rng_seed = common.seed;
    Ok(cfg)
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{c:.10}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_solve(a: SolveArgs) -> Result<u8> {
    match load_with(&a.common)? {
        ProblemFile::Svi(problem) => {
            let x0 = start_point(&a.common, problem.input_dim())?;
            let cfg = solver_cfg(&problem, &a.common, &[a.p], a.alpha_tilde, a.ell)?;
            let res = solve(&problem, a.p, &x0, &cfg)?;
            let moved = (&res.x_final - &x0).norm();
            println!("p            {}", a.p);
            println!("x0           {}", fmt_vec(&x0));
            println!("x_final      {}", fmt_vec(&res.x_final));
            println!("merit        {:.3e}", res.merit_final);
            println!("iterations   {}", res.iterations);
            println!("alpha        {}", res.alpha_used);
            println!(
                "bound        |x_final - x0| = {moved:.6} <= {:.6}  ({})",
                res.bound_rhs,
                if res.bound_holds { "holds" } else { "VIOLATED" }
            );
            println!("certified    {}", res.caristi_certified);
            if let Some(out) = &a.out {
                let report = serde_json::json!({
                    "p": a.p,
                    "x0": x0.as_slice(),
                    "x_final": res.x_final.as_slice(),
                    "merit": res.merit_final,
                    "iterations": res.iterations,
                    "alpha": res.alpha_used,
                    "bound_rhs": res.bound_rhs,
                    "bound_holds": res.bound_holds,
                    "caristi_certified": res.caristi_certified,
                    "segment_steps": res.segment_steps,
                });
                write_out(Some(out), &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            }
            Ok(0)
        }
        ProblemFile::Vop(spec) => {
            let x0 = start_point(&a.common, spec.input_dim())?;
            let cfg = vop_cfg(&spec, &a.common, &[a.p], a.alpha_lower, a.oracle_density)?;
            let res = svi::vopt::solve_ideal(&spec, a.p, &x0, &cfg)?;
            println!("p            {}", a.p);
            match &res.status {
                IdealStatus::Found { x, value } => {
                    println!("ideal point  {}", fmt_vec(x));
                    println!("value        {}", fmt_vec(value));
                }
                IdealStatus::NotFoundAfterBudget => println!("ideal point  not found within budget"),
                IdealStatus::CertifiedEmpty => println!("ideal point  none (certified by the oracle)"),
            }
            println!("merit        {:.3e}", res.merit_final);
            println!("hypotheses   {}", if res.hypotheses_hold { "hold" } else { "fail (projected descent)" });
            // An oracle-certified empty set is an answer; an exhausted budget is not.
            Ok(match res.status {
                IdealStatus::NotFoundAfterBudget => 2,
                _ => 0,
            })
        }
    }
}

fn install_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

fn summarize(table: &SweepTable) {
    let solved = table.rows.iter().filter(|r| r.solved).count();
    eprintln!(
        "{solved}/{} rows solved, {} iterations, {:.2?}",
        table.rows.len(),
        table.total_iterations(),
        table.meta.wall_time
    );
    let column = if table.rows.iter().any(|r| r.value.is_some()) { Column::Value } else { Column::Solution };
    if let Ok(report) = continuity_report(table, None, column) {
        eprintln!(
            "max step ratio {:.4}, {} flagged steps, unsolved runs {:?}",
            report.max_step_ratio,
            report.discontinuity_flags.len(),
            report.unsolved_runs
        );
    }
}

fn emit_csv(table: &SweepTable, out: Option<&Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    write_out(out, &String::from_utf8(buf)?)
}

fn cmd_sweep(a: SweepArgs) -> Result<u8> {
    install_jobs(a.jobs)?;
    let ProblemFile::Svi(problem) = load_with(&a.common)? else {
        return Err(usage("sweep needs an inclusion problem; use `vopt` for optimization problems"));
    };
    let x0 = start_point(&a.common, problem.input_dim())?;
    let cfg = solver_cfg(&problem, &a.common, &a.grid.0, a.alpha_tilde, a.ell)?;
    let table = if a.cold {
        sweep_cold(&problem, &a.grid.0, &x0, &cfg)?
    } else {
        sweep(&problem, &a.grid.0, &x0, &cfg)?
    };
    emit_csv(&table, a.out.as_deref())?;
    summarize(&table);
    Ok(0)
}

fn cmd_estimate(a: EstimateArgs) -> Result<u8> {
    let mode = match a.mode {
        ModeArg::Increase => Mode::Increase,
        ModeArg::Decrease => Mode::Decrease,
    };
    let cfg = sampling_cfg(a.common.seed);
    let est = match load_with(&a.common)? {
        ProblemFile::Svi(problem) => {
            let x = start_point(&a.common, problem.input_dim())?;
            estimate_bound(&problem.at(a.p)?, &problem.cone, &x, &cfg, mode)
        }
        ProblemFile::Vop(spec) => {
            let x = start_point(&a.common, spec.input_dim())?;
            estimate_bound(&spec.objective_map(a.p), &spec.cone, &x, &cfg, mode)
        }
    };
    match est {
        Ok(est) => {
            println!("bracket      [{:.9}, {:.9}]", est.alpha_lo, est.alpha_hi);
            println!("scale        {}", est.delta_used);
            for w in &est.witnesses {
                println!("witness      r = {:.6}  u = {}", w.radius, fmt_vec(&w.point));
            }
            Ok(0)
        }
        Err(svi::Error::PropertyAbsent { x }) => {
            println!("property absent at {x:?}: no constant above 1 admits witnesses");
            Ok(0)
        }
        Err(e) => Err(e.into()),
    }
}

fn vop_cfg(
    spec: &VopSpec,
    common: &Common,
    grid: &[f64],
    alpha_lower: Option<f64>,
    oracle_density: Option<usize>,
) -> Result<VopConfig> {
    let alpha_lower = match alpha_lower {
        Some(a) => a,
        None => {
            let n = spec.input_dim();
            let window = PointSampling {
                lower: vec![-2.0; n],
                upper: vec![2.0; n],
                count: 8,
            };
            let coarse: Vec<f64> = if grid.len() > 9 {
                linspace(grid[0], grid[grid.len() - 1], 9)
            } else {
                grid.to_vec()
            };
            let a = estimate_alpha_lower(spec, &coarse, &window, &sampling_cfg(common.seed))?;
            log::info!("estimated decrease bound {a:.6}");
            a
        }
    };
    let mut cfg = VopConfig {
        alpha_lower: Some(alpha_lower),
        oracle_density,
        ..VopConfig::default()
    };
    if let Some(t) = common.tol {
        cfg.solver.tol = t;
    }
    if common.alpha.is_some() {
        return Err(usage("--alpha is derived from --alpha-lower for optimization problems"));
    }
    cfg.solver.rng_seed = common.seed;
    Ok(cfg)
}

fn cmd_vopt(a: VoptArgs) -> Result<u8> {
    install_jobs(a.jobs)?;
    let ProblemFile::Vop(spec) = load_with(&a.common)? else {
        return Err(usage("vopt needs an optimization problem (kind \"vop\")"));
    };
    let x0 = start_point(&a.common, spec.input_dim())?;
    let cfg = vop_cfg(&spec, &a.common, &a.grid.0, a.alpha_lower, a.oracle_density)?;
    let table = ideal_value_sweep(&spec, &a.grid.0, &x0, &cfg)?;
    emit_csv(&table, a.out.as_deref())?;
    summarize(&table);
    if let Some(d) = a.oracle_density {
        let coarse = table
            .rows
            .iter()
            .filter(|r| brute_force_ideal(&spec, r.p, d).map(|rep| rep.grid_too_coarse).unwrap_or(false))
            .count();
        if coarse > 0 {
            eprintln!("warning: the oracle verdict depends on the grid density at {coarse} rows");
        }
        let disagree = table
            .rows
            .iter()
            .filter(|r| r.solved != (r.oracle_status.as_deref() == Some("ideal")))
            .count();
        eprintln!("solver and oracle disagree at {disagree} rows");
    }
    Ok(0)
}

fn cmd_example(a: ExampleArgs) -> Result<u8> {
    if a.list {
        for name in EXAMPLE_NAMES {
            println!("{name}");
        }
        return Ok(0);
    }
    let Some(name) = a.name else {
        return Err(usage("name an example or pass --list"));
    };
    let file = example(&name).map_err(|e| usage(e.to_string()))?;
    write_out(a.out.as_deref(), &format!("{}\n", file.to_json()?))?;
    Ok(0)
}
