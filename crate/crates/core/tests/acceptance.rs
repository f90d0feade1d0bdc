//! Acceptance suite: one check per criterion, each printing a PASS/FAIL line.
//! Runs without the libtest harness so the lines always reach stdout.

mod common;

use std::f64::consts::{FRAC_PI_4, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use svi::catalog;
use svi::geometry::{enlargement_inclusion, excess, vector, Inclusion};
use svi::increase::{estimate_bound, Mode, PointSampling, SamplingConfig};
use svi::parametric::{continuity_report, csv_string, sweep, sweep_cold, Column};
use svi::sampling::linspace;
use svi::setmaps::rotation;
use svi::solver::{solve, SolverConfig};
use svi::vopt::{
    brute_force_ideal, estimate_alpha_lower, ideal_value_sweep, OracleOutcome, VopConfig, VopSpec,
};
use svi::{Error, PolyCone, SumSet, Vector};

use common::*;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_budget(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = started.elapsed();
    ensure!(t < limit, "{what} took {t:.2?}, limit {limit:?}");
    Ok(())
}

/// Excess calculus on random polytope/cone pairs.
fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = rng(1);
    let mut worst_vertex = 0.0f64;
    let mut worst_enlarge = 0.0f64;
    let mut enlarge_cases = 0;
    for case in 0..200 {
        let m = 2 + case % 2;
        let cone = random_cone(&mut rng, m);
        let a = random_polytope(&mut rng, m);
        let c = SumSet::cone(cone.clone());
        let exc = excess(&a, &c).map_err(|e| e.to_string())?;

        // Vertex attainment against exact cone distances over hull samples.
        let oracle = ConeDistance::new(cone.generators());
        let sampled = hull_samples(&mut rng, &a, 10_000)
            .par_iter()
            .map(|x| oracle.dist(x))
            .reduce(|| 0.0, f64::max);
        worst_vertex = worst_vertex.max((sampled - exc).abs());
        ensure!((sampled - exc).abs() <= 1e-6, "case {case}: excess {exc} vs sampled sup {sampled}");

        // Adding cone directions to the vertices never increases the excess.
        let mut shifted: Vec<Vector> = a.vertices().to_vec();
        for v in a.vertices() {
            for _ in 0..4 {
                let mut y = v.clone();
                for g in cone.generators() {
                    y += g * uniform(&mut rng, 0.0, 2.0);
                }
                shifted.push(y);
            }
        }
        let shifted = svi::VPolytope::new(shifted).map_err(|e| e.to_string())?;
        let exc_shifted = excess(&shifted, &c).map_err(|e| e.to_string())?;
        ensure!(
            (exc_shifted - exc).abs() <= 1e-9,
            "case {case}: shifted excess {exc_shifted} vs {exc} with the unshifted vertices included"
        );

        // Enlargement adds exactly its radius, read off by bisecting on r.
        if exc > 1e-6 {
            enlarge_cases += 1;
            let s = uniform(&mut rng, 0.1, 1.0);
            let (mut lo, mut hi) = (0.0, exc + s + 1.0);
            for _ in 0..60 {
                let r = 0.5 * (lo + hi);
                match enlargement_inclusion(&a, s, &c, r, 64).map_err(|e| e.to_string())? {
                    Inclusion::Holds => hi = r,
                    _ => lo = r,
                }
            }
            worst_enlarge = worst_enlarge.max((hi - (exc + s)).abs());
            ensure!((hi - (exc + s)).abs() <= 1e-6, "case {case}: enlarged excess {hi} vs {}", exc + s);
        }
    }
    within_budget(started, Duration::from_secs(5), "criterion 1")?;
    Ok(format!(
        "200 pairs; vertex-attainment gap {worst_vertex:.1e}; enlargement gap {worst_enlarge:.1e} over {enlarge_cases} cases; {:.2?}",
        started.elapsed()
    ))
}

/// The printed bound 3/sqrt(2) + 1 is given to five decimals; allow the
/// rounding of that figure when testing containment.
const ROUNDING_SLACK: f64 = 5e-6;

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let cone = PolyCone::nonnegative_orthant(2);
    let cfg = SamplingConfig::default();
    let mut rng = rng(2);
    let mut widest = 0.0f64;
    let mut cases: Vec<(f64, f64, Vector, f64)> = (0..10)
        .map(|_| {
            let theta = uniform(&mut rng, 0.0, TAU);
            let x = vector(&[uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)]);
            (3.0, theta, x, 3.12132)
        })
        .collect();
    cases.push((5.0, 0.0, vector(&[0.0, 0.0]), 4.53553));
    for (lambda, theta, x, printed) in &cases {
        let prob = catalog::rotation(*lambda, false);
        let map = prob.at(*theta).map_err(|e| e.to_string())?;
        let est = estimate_bound(&map, &cone, x, &cfg, Mode::Increase).map_err(|e| e.to_string())?;
        let width = est.alpha_hi - est.alpha_lo;
        widest = widest.max(width);
        ensure!(
            est.alpha_lo <= printed + ROUNDING_SLACK && printed - ROUNDING_SLACK <= est.alpha_hi,
            "{lambda}O_{theta:.3} at {:?}: bracket [{}, {}] misses {printed}",
            x.as_slice(),
            est.alpha_lo,
            est.alpha_hi
        );
        ensure!(width <= 0.06, "bracket width {width}");
        let exact = rotation_increase(*lambda);
        ensure!((exact - printed).abs() <= ROUNDING_SLACK, "printed value {printed} vs {exact}");
    }
    within_budget(started, Duration::from_secs(30), "criterion 2")?;
    Ok(format!("11 brackets contain the bound; widest {widest:.1e}; {:.2?}", started.elapsed()))
}

fn criterion_3() -> Outcome {
    let prob = catalog::example_3_8();
    let map = prob.at(0.0).map_err(|e| e.to_string())?;
    let cfg = SamplingConfig::default();
    let mut rng = rng(3);
    let mut lowest = f64::INFINITY;
    for _ in 0..20 {
        let x = vector(&[uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)]);
        let est = estimate_bound(&map, &prob.cone, &x, &cfg, Mode::Increase).map_err(|e| e.to_string())?;
        lowest = lowest.min(est.alpha_lo);
        ensure!(est.alpha_lo >= 1.5607 - 0.1, "alpha_lo {} at {:?}", est.alpha_lo, x.as_slice());
    }
    Ok(format!("min alpha_lo over 20 points {lowest:.4} (needed >= 1.4607)"))
}

fn criterion_4_table() -> Result<(String, String), String> {
    let started = Instant::now();
    let prob = catalog::example_3_8();
    let grid = linspace(0.0, TAU, 65);
    let x0 = vector(&[0.0, 0.0]);
    let cfg = SolverConfig {
        alpha: 1.5,
        ..SolverConfig::default()
    };
    let table = sweep_cold(&prob, &grid, &x0, &cfg).map_err(|e| e.to_string())?;
    let mut worst_slack = f64::INFINITY;
    let mut worst_closed_form = 0.0f64;
    for row in &table.rows {
        ensure!(row.solved && row.merit <= 1e-8, "p = {}: merit {}", row.p, row.merit);
        let psi0 = prob.merit(row.p, &x0).map_err(|e| e.to_string())?;
        let bound = psi0 / 0.5 + 1e-6;
        let moved = (&row.x - &x0).norm();
        worst_slack = worst_slack.min(bound - moved);
        ensure!(moved <= bound, "p = {}: moved {moved} > bound {bound}", row.p);
        let phi = &rotation(FRAC_PI_4 - row.p) * vector(&[1.0, 0.0]);
        let m = prob.merit(row.p, &phi).map_err(|e| e.to_string())?;
        worst_closed_form = worst_closed_form.max(m);
        ensure!(m <= 1e-12, "closed form at p = {} has merit {m}", row.p);
    }
    within_budget(started, Duration::from_secs(60), "criterion 4")?;
    let csv = csv_string(&table).map_err(|e| e.to_string())?;
    Ok((
        format!(
            "65/65 solved; min bound slack {worst_slack:.3}; closed-form merit <= {worst_closed_form:.1e}; {:.2?}",
            started.elapsed()
        ),
        csv,
    ))
}

fn criterion_4() -> Outcome {
    criterion_4_table().map(|(msg, _)| msg)
}

/// Max step ratio of the warm-started sweep at `n` grid points.
fn sweep_ratio(n: usize) -> Result<f64, String> {
    let prob = catalog::example_3_8();
    let grid = linspace(0.0, TAU, n);
    let table = sweep(&prob, &grid, &vector(&[0.0, 0.0]), &SolverConfig::default()).map_err(|e| e.to_string())?;
    ensure!(table.all_solved(), "{n}-point sweep left rows unsolved");
    Ok(continuity_report(&table, None, Column::Solution)
        .map_err(|e| e.to_string())?
        .max_step_ratio)
}

/// The ratio estimates the local Lipschitz modulus of the tracked branch;
/// under doubling its distance to the fine-grid value must shrink.
fn criterion_5() -> Outcome {
    let r65 = sweep_ratio(65)?;
    let r129 = sweep_ratio(129)?;
    let reference = sweep_ratio(513)?;
    ensure!(r65 <= 2.0, "max step ratio {r65} at 65 points");
    let (d65, d129) = ((r65 - reference).abs(), (r129 - reference).abs());
    ensure!(
        d129 < d65,
        "deviation from the 513-point value grew: {d65:.4} -> {d129:.4}"
    );
    Ok(format!(
        "ratio 65: {r65:.4}, 129: {r129:.4}, 513: {reference:.4}; deviation {d65:.4} -> {d129:.4}"
    ))
}

fn criterion_6() -> Outcome {
    let prob = catalog::example_3_8_boxed();
    let cfg = SolverConfig::constrained(1.56, 0.5).map_err(|e| e.to_string())?;
    let starts = [[0.0, 0.0], [3.0, -2.5], [-4.0, 1.0], [1.5, 1.9], [-2.5, -2.5]];
    let (mut solved, mut total, mut segs) = (0, 0, 0);
    let mut worst_residual = 0.0f64;
    for p in linspace(0.0, TAU, 33) {
        for s in &starts {
            total += 1;
            let x0 = vector(s);
            let res = match solve(&prob, p, &x0, &cfg) {
                Ok(r) if r.merit_final <= cfg.tol => r,
                Ok(_) => continue,
                Err(e) if e.is_solver_failure() => continue,
                Err(e) => return Err(e.to_string()),
            };
            solved += 1;
            let moved = (&res.x_final - &x0).norm();
            ensure!(
                moved <= res.bound_rhs + 1e-6,
                "p = {p}, x0 = {s:?}: moved {moved} > certificate {}",
                res.bound_rhs
            );
            // The certificate must be the published expression.
            let dist0 = prob.constraint.at(p).and_then(|r| r.dist(&x0)).map_err(|e| e.to_string())?;
            let psi0 = prob.merit(p, &x0).map_err(|e| e.to_string())?;
            let kappa = 1.56 - res.alpha_used;
            let expected = (psi0 + kappa * dist0) / (kappa - 0.5);
            ensure!(
                (expected - res.bound_rhs).abs() <= 1e-9 * (1.0 + expected) || res.alpha_used != cfg.alpha,
                "certificate {} vs {expected}",
                res.bound_rhs
            );
            segs += res.segment_steps;
            worst_residual = worst_residual.max(res.segment_residual);
            ensure!(res.segment_residual <= 1e-9, "segment residual {}", res.segment_residual);
        }
    }
    ensure!(solved > 0, "no run solved");
    Ok(format!(
        "{solved}/{total} runs solved, all within their certificates; {segs} segment steps, residual <= {worst_residual:.1e}"
    ))
}

const TRIANGLE_POINTS: usize = 257;
const ORACLE_DENSITY: usize = 9;

/// Grid indices (away from table boundaries) where the oracle disagrees with
/// the tabulated classification or singleton values.
fn triangle_mismatches(spec: &VopSpec, grid: &[f64]) -> Result<(Vec<usize>, Vec<usize>, Vec<bool>), String> {
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut ideal = Vec::new();
    for (i, &p) in grid.iter().enumerate() {
        let report = brute_force_ideal(spec, p, ORACLE_DENSITY).map_err(|e| e.to_string())?;
        let agrees = match (&report.outcome, triangle_table(p)) {
            (OracleOutcome::Empty, None) => true,
            (OracleOutcome::Ideal { all, .. }, Some(t)) => all.iter().all(|x| (x - vector(&t)).norm() <= 1e-9),
            _ => false,
        };
        ideal.push(matches!(report.outcome, OracleOutcome::Ideal { .. }));
        if !agrees {
            if near_table_boundary(grid, i) {
                boundary.push(i);
            } else {
                interior.push(i);
            }
        }
    }
    Ok((interior, boundary, ideal))
}

fn criterion_7_table() -> Result<(String, String), String> {
    let started = Instant::now();
    let grid = linspace(0.0, TAU, TRIANGLE_POINTS);

    let mut chosen = None;
    let mut log = Vec::new();
    for clockwise in [true, false] {
        let spec = catalog::triangle_vop(clockwise);
        let (interior, boundary, ideal) = triangle_mismatches(&spec, &grid)?;
        let name = if clockwise { "clockwise O_p^T" } else { "counterclockwise O_p" };
        log.push(format!("{name}: {} interior / {} boundary mismatches", interior.len(), boundary.len()));
        if interior.is_empty() && chosen.is_none() {
            chosen = Some((clockwise, name, ideal, boundary.len()));
        }
    }
    let Some((clockwise, name, ideal, boundary_count)) = chosen else {
        return Err(format!("no orientation reproduces the table ({})", log.join("; ")));
    };

    let spec = catalog::triangle_vop(clockwise);
    let alpha_lower = estimate_alpha_lower(
        &spec,
        &linspace(0.0, TAU, 9),
        &PointSampling {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            count: 8,
        },
        &SamplingConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let cfg = VopConfig {
        alpha_lower: Some(alpha_lower),
        oracle_density: Some(ORACLE_DENSITY),
        ..VopConfig::default()
    };
    let table = ideal_value_sweep(&spec, &grid, &vector(&[1.0 / 3.0, 1.0 / 3.0]), &cfg).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for (i, row) in table.rows.iter().enumerate() {
        if near_table_boundary(&grid, i) {
            continue;
        }
        checked += 1;
        ensure!(
            row.solved == ideal[i],
            "p = {}: solve_ideal {} but oracle {}",
            row.p,
            if row.solved { "found a point" } else { "found none" },
            if ideal[i] { "ideal" } else { "empty" }
        );
        if let (true, Some(t)) = (row.solved, triangle_table(row.p)) {
            ensure!((&row.x - vector(&t)).norm() <= 1e-6, "p = {}: found {:?}", row.p, row.x.as_slice());
        }
    }
    within_budget(started, Duration::from_secs(60), "criterion 7")?;
    let csv = csv_string(&table).map_err(|e| e.to_string())?;
    Ok((
        format!(
            "table reproduced under the {name} action ({}); {boundary_count} mismatches within one step of a boundary; solve_ideal agrees at {checked} interior points (estimated decrease bound {alpha_lower:.4}); {:.2?}",
            log.join("; "),
            started.elapsed()
        ),
        csv,
    ))
}

fn criterion_7() -> Outcome {
    criterion_7_table().map(|(msg, _)| msg)
}

fn criterion_8() -> Outcome {
    let spec = catalog::sine_deviation_vop();
    let grid = linspace(0.0, TAU, 65);
    let alpha_lower = estimate_alpha_lower(
        &spec,
        &linspace(0.0, TAU, 9),
        &PointSampling {
            lower: vec![-2.0],
            upper: vec![2.0],
            count: 8,
        },
        &SamplingConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let cfg = VopConfig {
        alpha_lower: Some(alpha_lower),
        ..VopConfig::default()
    };
    let table = ideal_value_sweep(&spec, &grid, &vector(&[0.0]), &cfg).map_err(|e| e.to_string())?;
    let (mut worst_x, mut worst_val) = (0.0f64, 0.0f64);
    for row in &table.rows {
        ensure!(row.solved, "p = {} unsolved", row.p);
        let dx = (row.x[0] - row.p.sin()).abs();
        let val = row.value.as_ref().map_or(f64::INFINITY, |v| v.amax());
        worst_x = worst_x.max(dx);
        worst_val = worst_val.max(val);
        ensure!(dx <= 1e-6, "p = {}: x = {} vs sin p", row.p, row.x[0]);
        ensure!(val <= 1e-9, "p = {}: value {val}", row.p);
    }

    let scfg = SamplingConfig::default();
    let mut rng = rng(8);
    let mut lowest = f64::INFINITY;
    for _ in 0..10 {
        let p = grid[rng_index(&mut rng, grid.len())];
        let phi = p.sin();
        let x = loop {
            let x = uniform(&mut rng, -2.0, 2.0);
            if (x - phi).abs() > 1e-3 {
                break x;
            }
        };
        let map = spec.objective_map(p);
        let est = estimate_bound(&map, &spec.cone, &vector(&[x]), &scfg, Mode::Decrease).map_err(|e| e.to_string())?;
        lowest = lowest.min(est.alpha_lo);
        ensure!(est.alpha_lo >= 1.95, "p = {p}, x = {x}: alpha_lo {}", est.alpha_lo);
    }
    let mut at_kink = Vec::new();
    // Grid points are knots of the center path, where it equals sin p.
    for p in [grid[5], grid[27], grid[40]] {
        let map = spec.objective_map(p);
        let phi = p.sin();
        match estimate_bound(&map, &spec.cone, &vector(&[phi]), &scfg, Mode::Decrease) {
            Err(Error::PropertyAbsent { .. }) => at_kink.push("absent".to_string()),
            Ok(est) => {
                ensure!((est.alpha_lo - 1.0).abs() <= 0.05, "at the kink: alpha_lo {}", est.alpha_lo);
                at_kink.push(format!("{:.3}", est.alpha_lo));
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!(
        "65/65 rows: |x - sin p| <= {worst_x:.1e}, |val| <= {worst_val:.1e}; decrease alpha_lo >= {lowest:.4} off the kink; at the kink: {}",
        at_kink.join(", ")
    ))
}

fn rng_index(rng: &mut rand_chacha::ChaCha8Rng, len: usize) -> usize {
    ((uniform(rng, 0.0, 1.0) * len as f64) as usize).min(len - 1)
}

fn criterion_9() -> Outcome {
    let (_, a4) = criterion_4_table()?;
    let (_, b4) = criterion_4_table()?;
    ensure!(a4 == b4, "criterion 4 CSV differs between runs");
    let (_, a7) = criterion_7_table()?;
    let (_, b7) = criterion_7_table()?;
    ensure!(a7 == b7, "criterion 7 CSV differs between runs");
    Ok(format!("identical CSVs ({} and {} bytes)", a4.len(), a7.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("excess calculus", criterion_1),
        ("rescaled-rotation bound", criterion_2),
        ("perturbation calculus", criterion_3),
        ("global solvability and error bound", criterion_4),
        ("continuity of the tracked solution", criterion_5),
        ("constrained solvability", criterion_6),
        ("ideal-efficiency counterexample", criterion_7),
        ("deviation ideal problem", criterion_8),
        ("determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("{label}: PASS [{:.2?}] {detail}", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("{label}: FAIL [{:.2?}] {why}", started.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
