//! Parameter sweeps: solving along a grid of `p`, warm-starting each solve at
//! the previous solution so the rows trace one continuous branch, plus
//! continuity diagnostics over the resulting table.

use std::io::Write;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::sampling::fingerprint;
use crate::solver::{solve, SolveResult, SolverConfig};
use crate::setmaps::SviProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub x: Vector,
    pub merit: f64,
    pub bound_rhs: f64,
    pub bound_holds: bool,
    pub solved: bool,
    pub iterations: usize,
    /// Starting point of this row's solve.
    pub start: Vector,
    /// Objective value `f(p, x)` for ideal-value sweeps.
    pub value: Option<Vector>,
    pub oracle_status: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMeta {
    pub problem_hash: u64,
    pub cfg: SolverConfig,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub meta: SweepMeta,
}

impl SweepTable {
    pub fn total_iterations(&self) -> usize {
        self.rows.iter().map(|r| r.iterations).sum()
    }

    pub fn all_solved(&self) -> bool {
        self.rows.iter().all(|r| r.solved)
    }
}

/// Hash of a problem's canonical JSON form.
pub fn problem_hash<T: Serialize>(problem: &T) -> u64 {
    let json = serde_json::to_vec(problem).unwrap_or_default();
    fingerprint(json)
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("parameter grid is empty".into()));
    }
    if grid.iter().any(|p| !p.is_finite()) || grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidConfig("parameter grid must be finite and sorted".into()));
    }
    Ok(())
}

/// Turns one solve outcome into a row. Solver failures become unsolved rows;
/// anything else is propagated.
pub fn row_from_outcome(
    p: f64,
    start: &Vector,
    outcome: Result<SolveResult>,
    tol: f64,
) -> Result<SweepRow> {
    match outcome {
        Ok(res) => Ok(SweepRow {
            p,
            solved: res.merit_final <= tol,
            x: res.x_final,
            merit: res.merit_final,
            bound_rhs: res.bound_rhs,
            bound_holds: res.bound_holds,
            iterations: res.iterations,
            start: start.clone(),
            value: None,
            oracle_status: None,
        }),
        Err(e) if e.is_solver_failure() => {
            log::debug!("p = {p}: {e}");
            let (x, merit, iterations) = match &e {
                Error::NoDescentStep { x, merit, .. } => (Vector::from_column_slice(x), *merit, 0),
                Error::MaxItersExceeded {
                    iterations,
                    merit,
                    x,
                } => (Vector::from_column_slice(x), *merit, *iterations),
                _ => (start.clone(), f64::NAN, 0),
            };
            Ok(SweepRow {
                p,
                x,
                merit,
                bound_rhs: f64::NAN,
                bound_holds: false,
                solved: false,
                iterations,
                start: start.clone(),
                value: None,
                oracle_status: None,
            })
        }
        Err(e) => Err(e),
    }
}

/// Warm-started sweep with an arbitrary per-row solver. The next row starts
/// from the last solved point.
pub fn sweep_with<F>(grid: &[f64], x_init: &Vector, tol: f64, mut solve_row: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(f64, &Vector) -> Result<SolveResult>,
{
    validate_grid(grid)?;
    let mut warm = x_init.clone();
    let mut rows = Vec::with_capacity(grid.len());
    for &p in grid {
        let row = row_from_outcome(p, &warm, solve_row(p, &warm), tol)?;
        if row.solved {
            warm = row.x.clone();
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Cold-start sweep: every row starts from `x_init` with its own seed, rows
/// solved in parallel.
pub fn sweep_cold_with<F>(grid: &[f64], x_init: &Vector, cfg: &SolverConfig, solve_row: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, &Vector, &SolverConfig) -> Result<SolveResult> + Sync,
{
    validate_grid(grid)?;
    grid.par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let row_cfg = SolverConfig {
                rng_seed: cfg.rng_seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            row_from_outcome(p, x_init, solve_row(p, x_init, &row_cfg), cfg.tol)
        })
        .collect()
}

fn anchored(cfg: &SolverConfig, x_init: &Vector) -> SolverConfig {
    SolverConfig {
        anchor: Some(cfg.anchor.clone().unwrap_or_else(|| x_init.iter().copied().collect())),
        ..cfg.clone()
    }
}

/// Warm-started sweep. Unless `cfg.anchor` is set, terminal steps are
/// anchored at `x_init`: among the landing points in the solution set the one
/// nearest `x_init` is taken, which keeps the tracked solutions on one
/// continuous branch instead of drifting along the boundary of the solution
/// set as it moves with `p`.
pub fn sweep(problem: &SviProblem, grid: &[f64], x_init: &Vector, cfg: &SolverConfig) -> Result<SweepTable> {
    let started = Instant::now();
    let cfg = &anchored(cfg, x_init);
    let rows = sweep_with(grid, x_init, cfg.tol, |p, x0| solve(problem, p, x0, cfg))?;
    Ok(SweepTable {
        rows,
        meta: SweepMeta {
            problem_hash: problem_hash(problem),
            cfg: cfg.clone(),
            wall_time: started.elapsed(),
        },
    })
}

/// Cold-start counterpart of [`sweep`], anchored the same way.
pub fn sweep_cold(problem: &SviProblem, grid: &[f64], x_init: &Vector, cfg: &SolverConfig) -> Result<SweepTable> {
    let started = Instant::now();
    let cfg = &anchored(cfg, x_init);
    let rows = sweep_cold_with(grid, x_init, cfg, |p, x0, c| solve(problem, p, x0, c))?;
    Ok(SweepTable {
        rows,
        meta: SweepMeta {
            problem_hash: problem_hash(problem),
            cfg: cfg.clone(),
            wall_time: started.elapsed(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Solution,
    Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub max_step_ratio: f64,
    pub threshold: f64,
    /// Index of the later row of every consecutive pair above the threshold.
    pub discontinuity_flags: Vec<usize>,
    /// Maximal `[p_start, p_end]` intervals of unsolved rows.
    pub unsolved_runs: Vec<(f64, f64)>,
}

/// Step ratios `|x_{i+1} - x_i| / |p_{i+1} - p_i|` over consecutive solved
/// rows. The default threshold is ten times the median ratio.
pub fn continuity_report(table: &SweepTable, threshold: Option<f64>, column: Column) -> Result<ContinuityReport> {
    let rows = &table.rows;
    if rows.len() < 2 {
        return Err(Error::TooFewRows);
    }
    let pick = |r: &SweepRow| -> Option<Vector> {
        match column {
            Column::Solution => Some(r.x.clone()),
            Column::Value => r.value.clone(),
        }
    };
    let mut ratios = Vec::new();
    for (i, w) in rows.windows(2).enumerate() {
        if !(w[0].solved && w[1].solved) {
            continue;
        }
        let (Some(a), Some(b)) = (pick(&w[0]), pick(&w[1])) else {
            continue;
        };
        let dp = (w[1].p - w[0].p).abs();
        let ratio = if dp > 0.0 {
            (b - a).norm() / dp
        } else if (b - a).norm() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        ratios.push((i + 1, ratio));
    }
    let threshold = threshold.unwrap_or_else(|| {
        let mut sorted: Vec<f64> = ratios.iter().map(|r| r.1).collect();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.is_empty() { 0.0 } else { sorted[sorted.len() / 2] };
        (10.0 * median).max(1e-12)
    });
    let max_step_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let discontinuity_flags = ratios
        .iter()
        .filter(|(_, r)| *r > threshold)
        .map(|(i, _)| *i)
        .collect();

    let mut unsolved_runs = Vec::new();
    let mut current: Option<(f64, f64)> = None;
    for r in rows {
        if r.solved {
            if let Some(run) = current.take() {
                unsolved_runs.push(run);
            }
        } else {
            current = Some(match current {
                Some((a, _)) => (a, r.p),
                None => (r.p, r.p),
            });
        }
    }
    unsolved_runs.extend(current);

    Ok(ContinuityReport {
        max_step_ratio,
        threshold,
        discontinuity_flags,
        unsolved_runs,
    })
}

/// Writes the table as CSV: `p, x_1..x_n, merit, bound_rhs, bound_holds,
/// solved`, then `val_1..val_m, oracle_status` when any row carries values.
pub fn write_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let n = table.rows.first().map_or(0, |r| r.x.len());
    let m = table
        .rows
        .iter()
        .find_map(|r| r.value.as_ref().map(|v| v.len()));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["p".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["merit", "bound_rhs", "bound_holds", "solved"].map(String::from));
    if let Some(m) = m {
        header.extend((1..=m).map(|i| format!("val_{i}")));
        header.push("oracle_status".into());
    }
    let csv_err = |e: csv::Error| Error::Parse(format!("csv output failed: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in &table.rows {
        let mut rec = vec![r.p.to_string()];
        rec.extend(r.x.iter().map(|v| v.to_string()));
        rec.push(r.merit.to_string());
        rec.push(r.bound_rhs.to_string());
        rec.push(r.bound_holds.to_string());
        rec.push(r.solved.to_string());
        if let Some(m) = m {
            match &r.value {
                Some(v) => rec.extend(v.iter().map(|c| c.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), m)),
            }
            rec.push(r.oracle_status.clone().unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv output failed: {e}")))?;
    Ok(())
}

pub fn csv_string(table: &SweepTable) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}
