//! Caristi descent: repeatedly move to a point `u` with
//! `merit(u) + k |u - x| <= merit(x)` until the merit vanishes. Summing the
//! accepted inequalities bounds the path length by `merit(x0) / k`, which is
//! the error-bound certificate reported with every run.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::sampling::{point_seed, unit_directions};
use crate::setmaps::{ConstraintSet, SviProblem};

pub type MeritFn<'a> = dyn Fn(&Vector) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Descent constant `alpha`; in constrained mode the inner `alpha` of the
    /// pair `(alpha_tilde, alpha)`.
    pub alpha: f64,
    /// Constrained mode only: the increase constant over the constraint.
    pub alpha_tilde: Option<f64>,
    /// Lipschitz budget used by the constrained descent constants.
    pub ell: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub radius0: f64,
    pub radius_decay: f64,
    /// Radii below this are not tried.
    pub min_radius: f64,
    pub direction_samples: usize,
    pub rng_seed: u64,
    /// When set, a step that reaches the solution set lands at the admissible
    /// point closest to this anchor instead of the first one found.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1.5,
            alpha_tilde: None,
            ell: 0.0,
            tol: 1e-8,
            max_iters: 10_000,
            radius0: 1.0,
            radius_decay: 0.5,
            min_radius: 1e-13,
            direction_samples: 64,
            rng_seed: 0,
            anchor: None,
        }
    }
}

/// Conservative descent constant from an increase estimate:
/// `min(1.5, 0.9 est)`, kept above 1.
pub fn default_alpha(alpha_est: f64) -> f64 {
    let a = (0.9 * alpha_est).min(1.5);
    if a > 1.0 {
        a
    } else {
        1.0 + 0.5 * (alpha_est - 1.0).max(0.0)
    }
}

impl SolverConfig {
    /// Constrained configuration with `alpha` at the middle of the admissible
    /// interval `((alpha_tilde - ell + 1)/2, alpha_tilde - ell)`.
    pub fn constrained(alpha_tilde: f64, ell: f64) -> Result<Self> {
        let (lo, hi) = constrained_interval(alpha_tilde, ell)?;
        Ok(SolverConfig {
            alpha: 0.5 * (lo + hi),
            alpha_tilde: Some(alpha_tilde),
            ell,
            ..SolverConfig::default()
        })
    }

    fn validate_common(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.radius0 > 0.0
            && self.radius_decay > 0.0
            && self.radius_decay < 1.0
            && self.min_radius > 0.0
            && self.direction_samples > 0
            && self.ell >= 0.0;
        if !ok {
            return Err(Error::InvalidConfig(
                "need tol, radius0, min_radius > 0, radius_decay in (0,1), ell >= 0 and directions > 0"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn validate_unconstrained(&self) -> Result<()> {
        self.validate_common()?;
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn validate_constrained(&self) -> Result<(f64, f64)> {
        self.validate_common()?;
        let alpha_tilde = self.alpha_tilde.ok_or_else(|| {
            Error::InvalidConfig("constrained mode needs alpha_tilde".into())
        })?;
        let (lo, hi) = constrained_interval(alpha_tilde, self.ell)?;
        if !(self.alpha > lo && self.alpha < hi) {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} must lie in ({lo}, {hi})",
                self.alpha
            )));
        }
        Ok((alpha_tilde, self.alpha))
    }
}

/// Admissible open interval for the inner constant of constrained descent.
pub fn constrained_interval(alpha_tilde: f64, ell: f64) -> Result<(f64, f64)> {
    let lo = 0.5 * (alpha_tilde - ell + 1.0);
    let hi = alpha_tilde - ell;
    if !(lo < hi) {
        return Err(Error::HypothesisViolated(format!(
            "no admissible alpha: need ell < alpha_tilde - 1 (alpha_tilde = {alpha_tilde}, ell = {ell})"
        )));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Accepted { u: Vector, merit: f64 },
    Converged,
    NoDescentStep { radii_tried: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x_final: Vector,
    /// Final value of the merit being driven to zero (penalized in
    /// constrained mode).
    pub merit_final: f64,
    pub iterations: usize,
    pub path_length: f64,
    pub caristi_certified: bool,
    pub bound_rhs: f64,
    pub bound_holds: bool,
    /// Constant whose telescoped inequalities give `bound_rhs`.
    pub descent_constant: f64,
    pub alpha_used: f64,
    /// Merit values of the accepted iterates, starting with `merit(x0)`.
    pub merit_trace: Vec<f64>,
    pub segment_steps: usize,
    /// Largest deviation from `dist(u, R) = dist(x, R) - t` over segment steps.
    pub segment_residual: f64,
}

/// Negative central-difference gradient of `merit`, normalized.
fn descent_direction(merit: &MeritFn, x: &Vector) -> Result<Option<Vector>> {
    let h = 1e-7 * (1.0 + x.norm());
    let mut g = Vector::zeros(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (merit(&xp)? - merit(&xm)?) / (2.0 * h);
    }
    let n = g.norm();
    Ok((n > 1e-12 && n.is_finite()).then(|| -g / n))
}

fn step_directions(x: &Vector, cfg: &SolverConfig) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ point_seed(0.0, x));
    let phase: f64 = rng.random();
    unit_directions(x.len(), cfg.direction_samples, phase)
}

fn caristi_step_inner(
    merit: &MeritFn,
    project: Option<&(dyn Fn(&Vector) -> Result<Vector> + Sync)>,
    x: &Vector,
    merit_x: f64,
    descent_k: f64,
    cfg: &SolverConfig,
) -> Result<Step> {
    if merit_x <= cfg.tol {
        return Ok(Step::Converged);
    }
    if !(descent_k > 0.0) {
        return Err(Error::InvalidData(format!("descent constant must be positive, got {descent_k}")));
    }
    let mut dirs = Vec::with_capacity(cfg.direction_samples + 1);
    if let Some(d) = descent_direction(merit, x)? {
        dirs.push(d);
    }
    dirs.extend(step_directions(x, cfg));

    // No step longer than merit(x)/k can pass the test, as merit >= 0.
    let mut radii = Vec::new();
    let mut r = cfg.radius0.min(merit_x / descent_k);
    while r >= cfg.min_radius {
        radii.push(r);
        r *= cfg.radius_decay;
    }
    // Direction-major order: the heuristic direction is tried at every
    // radius before any sampled direction.
    for d in &dirs {
        for &r in &radii {
            let mut u = x + d * r;
            if let Some(proj) = project {
                u = proj(&u)?;
            }
            let len = (&u - x).norm();
            if len == 0.0 {
                continue;
            }
            let mu = merit(&u)?;
            if mu + descent_k * len <= merit_x {
                if mu <= cfg.tol {
                    if let Some(anchor) = &cfg.anchor {
                        return nearest_terminal(merit, project, x, merit_x, &dirs, &radii, descent_k, cfg, anchor);
                    }
                    return shorten_terminal(merit, x, merit_x, u, mu, descent_k, cfg.tol);
                }
                return Ok(Step::Accepted { u, merit: mu });
            }
        }
    }
    let radii_tried = radii.len();
    Ok(Step::NoDescentStep { radii_tried })
}

/// Among all directions whose step lands in the solution set, the shortened
/// landing point closest to `anchor` (lowest index on ties).
#[allow(clippy::too_many_arguments)]
fn nearest_terminal(
    merit: &MeritFn,
    project: Option<&(dyn Fn(&Vector) -> Result<Vector> + Sync)>,
    x: &Vector,
    merit_x: f64,
    dirs: &[Vector],
    radii: &[f64],
    descent_k: f64,
    cfg: &SolverConfig,
    anchor: &[f64],
) -> Result<Step> {
    let anchor = Vector::from_column_slice(anchor);
    let landings = dirs
        .par_iter()
        .map(|d| -> Result<Option<(f64, Vector, f64)>> {
            for &r in radii {
                let mut u = x + d * r;
                if let Some(proj) = project {
                    u = proj(&u)?;
                }
                let len = (&u - x).norm();
                if len == 0.0 {
                    continue;
                }
                let mu = merit(&u)?;
                if mu <= cfg.tol && mu + descent_k * len <= merit_x {
                    if let Step::Accepted { u, merit: m } =
                        shorten_terminal(merit, x, merit_x, u, mu, descent_k, cfg.tol)?
                    {
                        return Ok(Some(((&u - &anchor).norm(), u, m)));
                    }
                    return Ok(None);
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, Vector, f64)> = None;
    for (gap, u, m) in landings.into_iter().flatten() {
        if best.as_ref().map_or(true, |(g, _, _)| gap < *g) {
            best = Some((gap, u, m));
        }
    }
    let (_, u, m) = best.expect("called after a terminal step was found");
    Ok(Step::Accepted { u, merit: m })
}

/// A step that lands in the solution set is cut back to the first point of
/// the segment where the merit reaches `tol`. By convexity of the merit along
/// the segment every such point still passes the Caristi test; it is
/// re-checked anyway. Without this, steps overshoot deep into the solution
/// set and warm-started sweeps move in jumps.
fn shorten_terminal(
    merit: &MeritFn,
    x: &Vector,
    merit_x: f64,
    u: Vector,
    merit_u: f64,
    descent_k: f64,
    tol: f64,
) -> Result<Step> {
    let dir = &u - x;
    let len = dir.norm();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = (u, merit_u);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let cand = x + &dir * mid;
        let m = merit(&cand)?;
        if m <= tol && m + descent_k * mid * len <= merit_x {
            hi = mid;
            best = (cand, m);
        } else {
            lo = mid;
        }
        if (hi - lo) * len < 1e-15 {
            break;
        }
    }
    Ok(Step::Accepted {
        u: best.0,
        merit: best.1,
    })
}

/// One first-improvement Caristi step: heuristic direction first, then the
/// sampled directions, over a geometric ladder of radii.
pub fn caristi_step(merit: &MeritFn, x: &Vector, descent_k: f64, cfg: &SolverConfig) -> Result<Step> {
    let mx = merit(x)?;
    caristi_step_inner(merit, None, x, mx, descent_k, cfg)
}

/// Moves `t` along the segment from `x` to its projection onto `set`.
pub fn segment_step(x: &Vector, set: &ConstraintSet, t: f64) -> Result<Vector> {
    let proj = set.project(x)?;
    let dist = (&proj - x).norm();
    if dist <= 1e-14 {
        return Err(Error::AlreadyFeasible);
    }
    if !(t > 0.0 && t <= dist * (1.0 + 1e-12)) {
        return Err(Error::InvalidData(format!(
            "segment step length {t} outside (0, {dist}]"
        )));
    }
    Ok(x + (proj - x) * (t.min(dist) / dist))
}

struct Run {
    x: Vector,
    iterations: usize,
    path_length: f64,
    certified: bool,
    trace: Vec<f64>,
    segment_steps: usize,
    segment_residual: f64,
}

impl Run {
    fn new(x0: &Vector, merit0: f64) -> Self {
        Run {
            x: x0.clone(),
            iterations: 0,
            path_length: 0.0,
            certified: true,
            trace: vec![merit0],
            segment_steps: 0,
            segment_residual: 0.0,
        }
    }

    fn accept(&mut self, u: Vector, merit_u: f64, k: f64) {
        let len = (&u - &self.x).norm();
        let before = *self.trace.last().expect("trace starts nonempty");
        if merit_u + k * len > before + 1e-12 {
            self.certified = false;
        }
        self.path_length += len;
        self.x = u;
        self.trace.push(merit_u);
        self.iterations += 1;
    }

    fn last_merit(&self) -> f64 {
        *self.trace.last().expect("trace starts nonempty")
    }

    fn finish(self, x0: &Vector, tol: f64, k: f64, alpha: f64, bound_rhs: f64) -> SolveResult {
        let bound_holds = (&self.x - x0).norm() <= bound_rhs + tol;
        SolveResult {
            merit_final: self.last_merit(),
            x_final: self.x,
            iterations: self.iterations,
            path_length: self.path_length,
            caristi_certified: self.certified,
            bound_rhs,
            bound_holds,
            descent_constant: k,
            alpha_used: alpha,
            merit_trace: self.trace,
            segment_steps: self.segment_steps,
            segment_residual: self.segment_residual,
        }
    }

    fn stalled(&self, radii_tried: usize) -> Error {
        Error::NoDescentStep {
            x: self.x.iter().copied().collect(),
            merit: self.last_merit(),
            radii_tried,
        }
    }

    fn exhausted(&self) -> Error {
        Error::MaxItersExceeded {
            iterations: self.iterations,
            merit: self.last_merit(),
            x: self.x.iter().copied().collect(),
        }
    }
}

/// Unconstrained descent on `merit` with constant `alpha - 1`; on a stall the
/// run continues once with `alpha` halfway toward 1.
pub fn solve_unconstrained(merit: &MeritFn, x0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate_unconstrained()?;
    let merit0 = merit(x0)?;
    let mut run = Run::new(x0, merit0);
    let mut alpha = cfg.alpha;
    let mut retried = false;
    loop {
        let k = alpha - 1.0;
        if run.last_merit() <= cfg.tol {
            return Ok(run.finish(x0, cfg.tol, k, alpha, merit0 / k));
        }
        if run.iterations >= cfg.max_iters {
            return Err(run.exhausted());
        }
        match caristi_step_inner(merit, None, &run.x, run.last_merit(), k, cfg)? {
            Step::Accepted { u, merit } => run.accept(u, merit, k),
            Step::Converged => return Ok(run.finish(x0, cfg.tol, k, alpha, merit0 / k)),
            Step::NoDescentStep { radii_tried } => {
                if retried {
                    return Err(run.stalled(radii_tried));
                }
                retried = true;
                alpha = 0.5 * (alpha + 1.0);
                log::debug!("no descent step at merit {}; retrying with alpha {alpha}", run.last_merit());
            }
        }
    }
}

/// Constrained descent on `merit + kappa dist(., R)`, `kappa = alpha_tilde - alpha`.
///
/// Outside `R` the iterate moves along the segment to its projection; inside,
/// it takes a Caristi step on the plain merit with constant `2 kappa - ell`.
/// Both moves decrease the penalized merit at rate `kappa - ell` when the
/// merit is `ell`-Lipschitz off `R`; every step is re-checked numerically and
/// `caristi_certified` records whether that held.
pub fn solve_constrained(
    merit: &MeritFn,
    constraint: &ConstraintSet,
    x0: &Vector,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let (alpha_tilde, mut alpha) = cfg.validate_constrained()?;
    let dist0 = constraint.dist(x0)?;
    let merit0 = merit(x0)?;
    let kappa0 = alpha_tilde - alpha;
    let certificate_k = kappa0 - cfg.ell;
    let bound_rhs = (merit0 + kappa0 * dist0) / certificate_k;

    let penalized = |x: &Vector, kappa: f64| -> Result<f64> {
        Ok(merit(x)? + kappa * constraint.dist(x)?)
    };
    let mut run = Run::new(x0, merit0 + kappa0 * dist0);
    let mut retried = false;
    loop {
        let kappa = alpha_tilde - alpha;
        let k_total = kappa - cfg.ell;
        if run.last_merit() <= cfg.tol {
            return Ok(run.finish(x0, cfg.tol, k_total, alpha, bound_rhs));
        }
        if run.iterations >= cfg.max_iters {
            return Err(run.exhausted());
        }
        let dist = constraint.dist(&run.x)?;
        if dist > 1e-12 {
            // Full step onto R: the segment identity predicts distance dist - t = 0.
            let t = dist;
            let u = segment_step(&run.x, constraint, t)?;
            let residual = (constraint.dist(&u)? - (dist - t)).abs();
            run.segment_residual = run.segment_residual.max(residual);
            run.segment_steps += 1;
            let value = penalized(&u, kappa)?;
            run.accept(u, value, k_total);
            continue;
        }
        let merit_x = merit(&run.x)?;
        let case_k = 2.0 * kappa - cfg.ell;
        match caristi_step_inner(merit, None, &run.x, merit_x, case_k, cfg)? {
            Step::Accepted { u, .. } => {
                let value = penalized(&u, kappa)?;
                run.accept(u, value, k_total);
            }
            Step::Converged => {
                // Within 1e-12 of R counts as feasible: record the plain
                // merit as the final value without counting a step.
                *run.trace.last_mut().expect("nonempty") = merit_x;
                return Ok(run.finish(x0, cfg.tol, k_total, alpha, bound_rhs));
            }
            Step::NoDescentStep { radii_tried } => {
                if retried {
                    return Err(run.stalled(radii_tried));
                }
                // Moving alpha toward the top of its interval lowers both
                // descent constants.
                retried = true;
                let (_, hi) = constrained_interval(alpha_tilde, cfg.ell)?;
                alpha = 0.5 * (alpha + hi);
                let value = penalized(&run.x, alpha_tilde - alpha)?;
                *run.trace.last_mut().expect("nonempty") = value;
                log::debug!("no descent step; retrying with alpha {alpha}");
            }
        }
    }
}

/// Descent restricted to `R`: every candidate is projected onto the
/// constraint before the Caristi test with constant `k`. Used when the
/// hypotheses of the constrained scheme cannot be met; no error bound is
/// claimed (`bound_rhs` is infinite).
pub fn solve_projected(
    merit: &MeritFn,
    constraint: &ConstraintSet,
    x0: &Vector,
    k: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate_common()?;
    let start = constraint.project(x0)?;
    let project = |u: &Vector| constraint.project(u);
    let mut run = Run::new(&start, merit(&start)?);
    run.path_length = (&start - x0).norm();
    loop {
        if run.last_merit() <= cfg.tol {
            return Ok(run.finish(x0, cfg.tol, k, f64::NAN, f64::INFINITY));
        }
        if run.iterations >= cfg.max_iters {
            return Err(run.exhausted());
        }
        match caristi_step_inner(merit, Some(&project), &run.x, run.last_merit(), k, cfg)? {
            Step::Accepted { u, merit } => run.accept(u, merit, k),
            Step::Converged => return Ok(run.finish(x0, cfg.tol, k, f64::NAN, f64::INFINITY)),
            Step::NoDescentStep { radii_tried } => return Err(run.stalled(radii_tried)),
        }
    }
}

/// Solves `F(p, x) ⊆ C` (and `x ∈ R(p)` when the problem is constrained)
/// from `x0`.
pub fn solve(problem: &SviProblem, p: f64, x0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    let at = problem.at(p)?;
    let cone = problem.cone_set();
    let merit = |x: &Vector| -> Result<f64> {
        crate::geometry::excess(&crate::setmaps::SetMap::eval(&at, x)?, &cone)
    };
    if problem.constraint.is_all_space() {
        solve_unconstrained(&merit, x0, cfg)
    } else {
        let constraint = problem.constraint.at(p)?;
        solve_constrained(&merit, &constraint, x0, cfg)
    }
}
