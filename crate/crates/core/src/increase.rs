//! Sampled estimation of the metric `C`-increase (and `C`-decrease) bound.
//!
//! For a candidate `u` at radius `r` the largest admissible enlargement is
//! `alpha(u) = 1 - need(u) / r`, where `need(u)` is the largest signed
//! distance from a vertex of `G(u)` to `G(x) + C`. The search maximizes this
//! over `u` in the ball; `check_increase` thresholds it and re-verifies the
//! inclusion independently.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    default_direction_count, enlargement_inclusion, excess, project_dist, Halfspaces, PolyCone,
    SumSet, Vector, GEOM_TOL, MAX_EXACT_DIM,
};
use crate::sampling::{point_seed, seed_phase, unit_directions};
use crate::setmaps::{MapFamily, Negated, SetMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Increase,
    Decrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Decreasing radii at which witnesses are required.
    pub radii: Vec<f64>,
    pub directions: usize,
    /// How many of the best sampled candidates get a local pattern search.
    pub refinement_rounds: usize,
    pub tolerance: f64,
    pub alpha_max: f64,
    /// The radius list is tried at each of these scales; the best scale
    /// plays the role of `delta`.
    pub radius_scales: Vec<f64>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            radii: vec![1.0, 0.5, 0.25, 0.125],
            directions: 128,
            refinement_rounds: 3,
            tolerance: 1e-7,
            alpha_max: 16.0,
            radius_scales: vec![1.0, 1.0 / 8.0, 1.0 / 64.0, 1.0 / 512.0],
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidConfig("radii must be positive and finite".into()));
        }
        if self.radii.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig("radii must be decreasing".into()));
        }
        if self.radius_scales.is_empty() || self.radius_scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("radius scales must be positive".into()));
        }
        if !(self.tolerance > 0.0) || !(self.alpha_max > 1.0) || self.directions == 0 {
            return Err(Error::InvalidConfig(
                "need tolerance > 0, alpha_max > 1 and at least one direction".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub radius: f64,
    pub point: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncreaseEstimate {
    pub x: Vector,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub delta_used: f64,
    pub witnesses: Vec<Witness>,
    pub mode: Mode,
}

/// How `need(u)` is measured against `G(x) + C`.
enum Target {
    Exact(Halfspaces),
    /// Plain distance: an upper bound on the signed distance, so the
    /// resulting alphas stay certified.
    Distance(SumSet),
}

struct Search<'a> {
    map: &'a dyn SetMap,
    x: &'a Vector,
    target: Target,
    target_set: SumSet,
    require_move: bool,
    merit_x: f64,
    dirs_for_check: usize,
}

impl<'a> Search<'a> {
    fn new(map: &'a dyn SetMap, cone: &PolyCone, x: &'a Vector, tol: f64) -> Result<Self> {
        let gx = map.eval(x)?;
        let merit_x = excess(&gx, &SumSet::cone(cone.clone()))?;
        let target_set = SumSet::new(gx, Some(cone.clone()))?;
        let target = if cone.dim() <= MAX_EXACT_DIM {
            Target::Exact(Halfspaces::of(&target_set)?)
        } else {
            Target::Distance(target_set.clone())
        };
        Ok(Search {
            map,
            x,
            target,
            target_set,
            require_move: merit_x > tol,
            merit_x,
            dirs_for_check: default_direction_count(cone.dim()),
        })
    }

    fn need(&self, u: &Vector) -> Result<f64> {
        let gu = self.map.eval(u)?;
        let mut worst = f64::NEG_INFINITY;
        for v in gu.vertices() {
            let sd = match &self.target {
                Target::Exact(hs) => hs.signed_distance(v)?.0,
                Target::Distance(set) => project_dist(v, set)?.distance,
            };
            worst = worst.max(sd);
        }
        Ok(worst)
    }

    fn admissible(&self, u: &Vector) -> bool {
        !self.require_move || (u - self.x).norm() > 1e-14
    }

    /// `alpha(u)` at radius `r`, or `None` for an inadmissible candidate.
    fn alpha_at(&self, u: &Vector, r: f64) -> Result<Option<f64>> {
        if !self.admissible(u) {
            return Ok(None);
        }
        Ok(Some(1.0 - self.need(u)? / r))
    }

    fn verify(&self, u: &Vector, alpha: f64, r: f64) -> Result<bool> {
        let gu = self.map.eval(u)?;
        Ok(enlargement_inclusion(&gu, alpha * r, &self.target_set, r, self.dirs_for_check)?.holds())
    }

    /// Candidate points at radius `r`, in priority order: hint directions,
    /// the merit-descent heuristic, then sampled directions at several
    /// magnitudes.
    fn candidates(&self, r: f64, dirs: &[Vector], heuristic: &[Vector]) -> Vec<Vector> {
        let hints = self.map.witness_hints(self.x);
        let mut out = Vec::new();
        for d in hints.iter().chain(heuristic) {
            for t in [1.0, 0.5] {
                out.push(self.x + d * (t * r));
            }
        }
        for t in [1.0, 0.75, 0.5, 0.25, 0.125] {
            for d in dirs {
                out.push(self.x + d * (t * r));
            }
        }
        if !self.require_move {
            out.push(self.x.clone());
        }
        out
    }

    /// Compass search for a larger `alpha(u)` inside the ball `B(x, r)`.
    fn refine(&self, start: Vector, start_alpha: f64, r: f64) -> Result<(Vector, f64)> {
        let n = start.len();
        let mut moves = Vec::with_capacity(2 * n + 4);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = Vector::zeros(n);
                e[i] = s;
                moves.push(e);
            }
        }
        if n == 2 {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for (a, b) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                moves.push(Vector::from_column_slice(&[a, b]));
            }
        }
        let (mut best, mut best_alpha) = (start, start_alpha);
        let mut step = r / 8.0;
        let mut evals = 0;
        while step > r * 1e-10 && evals < 4000 {
            let mut improved = None;
            for m in &moves {
                let mut u = &best + m * step;
                let off = &u - self.x;
                let norm = off.norm();
                if norm > r {
                    u = self.x + off * (r / norm);
                }
                evals += 1;
                if let Some(a) = self.alpha_at(&u, r)? {
                    if a > best_alpha + 1e-15 && improved.as_ref().map_or(true, |(_, b)| a > *b) {
                        improved = Some((u, a));
                    }
                }
            }
            match improved {
                Some((u, a)) => {
                    best = u;
                    best_alpha = a;
                }
                None => step *= 0.5,
            }
        }
        Ok((best, best_alpha))
    }

    /// Largest `alpha(u)` found at radius `r`, with its witness.
    fn best_at(
        &self,
        r: f64,
        dirs: &[Vector],
        heuristic: &[Vector],
        refinements: usize,
        alpha_max: f64,
    ) -> Result<Option<(f64, Vector)>> {
        let mut scored = Vec::new();
        for u in self.candidates(r, dirs, heuristic) {
            if let Some(a) = self.alpha_at(&u, r)? {
                scored.push((a, u));
            }
        }
        // Stable sort keeps the lowest index first among ties.
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut best: Option<(f64, Vector)> = scored.first().cloned();
        for (a, u) in scored.into_iter().take(refinements) {
            if best.as_ref().is_some_and(|(b, _)| *b >= alpha_max) {
                break;
            }
            let (u2, a2) = self.refine(u, a, r)?;
            if best.as_ref().map_or(true, |(b, _)| a2 > *b) {
                best = Some((a2, u2));
            }
        }
        Ok(best.map(|(a, u)| (a.min(alpha_max), u)))
    }
}

/// Negative finite-difference gradient of the merit `exc(G(.), C)` at `x`,
/// normalized; empty when the merit is locally flat.
fn merit_descent_direction(map: &dyn SetMap, cone: &SumSet, x: &Vector) -> Result<Vec<Vector>> {
    let n = x.len();
    let h = 1e-6 * (1.0 + x.norm());
    let mut grad = Vector::zeros(n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        grad[i] = (excess(&map.eval(&xp)?, cone)? - excess(&map.eval(&xm)?, cone)?) / (2.0 * h);
    }
    let norm = grad.norm();
    Ok(if norm > 1e-12 { vec![-grad / norm] } else { Vec::new() })
}

fn sample_directions(n: usize, cfg: &SamplingConfig, x: &Vector) -> Vec<Vector> {
    let phase = seed_phase(point_seed(0.0, x) ^ cfg.seed);
    unit_directions(n, cfg.directions, phase)
}

fn mode_map<'a>(map: &'a dyn SetMap, mode: Mode) -> Box<dyn SetMap + 'a> {
    match mode {
        Mode::Increase => Box::new(map),
        Mode::Decrease => Box::new(Negated(map)),
    }
}

/// Looks for `u` in `B(x, r)` with `B(G(u), alpha r) ⊆ B(G(x) + C, r)`.
pub fn check_increase(
    map: &dyn SetMap,
    cone: &PolyCone,
    x: &Vector,
    alpha: f64,
    r: f64,
    cfg: &SamplingConfig,
) -> Result<Option<Vector>> {
    if !(alpha > 1.0 && r > 0.0) {
        return Err(Error::InvalidData(format!(
            "need alpha > 1 and r > 0 (alpha = {alpha}, r = {r})"
        )));
    }
    let search = Search::new(map, cone, x, cfg.tolerance)?;
    let dirs = sample_directions(x.len(), cfg, x);
    let heuristic = merit_descent_direction(map, &SumSet::cone(cone.clone()), x)?;
    let mut scored = Vec::new();
    for u in search.candidates(r, &dirs, &heuristic) {
        if let Some(a) = search.alpha_at(&u, r)? {
            if a >= alpha && search.verify(&u, alpha, r)? {
                return Ok(Some(u));
            }
            scored.push((a, u));
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (a, u) in scored.into_iter().take(cfg.refinement_rounds) {
        let (u, a2) = search.refine(u, a, r)?;
        if a2 >= alpha && search.verify(&u, alpha, r)? {
            return Ok(Some(u));
        }
    }
    Ok(None)
}

/// Brackets the exact increase (or decrease) bound of `map` at `x`.
pub fn estimate_bound(
    map: &dyn SetMap,
    cone: &PolyCone,
    x: &Vector,
    cfg: &SamplingConfig,
    mode: Mode,
) -> Result<IncreaseEstimate> {
    cfg.validate()?;
    let g = mode_map(map, mode);
    let search = Search::new(g.as_ref(), cone, x, cfg.tolerance)?;
    let dirs = sample_directions(x.len(), cfg, x);
    let heuristic = merit_descent_direction(g.as_ref(), &SumSet::cone(cone.clone()), x)?;

    // Per scale: the best alpha found at every radius of the scaled ladder.
    let mut best_scale: Option<(f64, f64, Vec<(f64, f64, Vector)>)> = None;
    for &scale in &cfg.radius_scales {
        let mut per_radius = Vec::with_capacity(cfg.radii.len());
        let mut floor = f64::INFINITY;
        for &r0 in &cfg.radii {
            let r = r0 * scale;
            match search.best_at(r, &dirs, &heuristic, cfg.refinement_rounds, cfg.alpha_max)? {
                Some((a, u)) => {
                    floor = floor.min(a);
                    per_radius.push((r, a, u));
                }
                None => {
                    floor = f64::NEG_INFINITY;
                    break;
                }
            }
        }
        log::trace!("scale {scale}: alpha floor {floor}");
        if best_scale.as_ref().map_or(true, |(f, _, _)| floor > *f) {
            best_scale = Some((floor, scale, per_radius));
        }
    }
    let (floor, scale, per_radius) = best_scale.expect("at least one radius scale");
    if !(floor > 1.0 + cfg.tolerance) {
        log::debug!(
            "no alpha above 1 at x = {:?} (merit {}), best floor {floor}",
            x.as_slice(),
            search.merit_x
        );
        return Err(Error::PropertyAbsent {
            x: x.iter().copied().collect(),
        });
    }

    // Bisection over alpha against the cached per-radius searches: alpha is
    // witnessed at radius r exactly when the best alpha found there reaches it.
    let witnessed = |alpha: f64| per_radius.iter().all(|(_, a, _)| *a >= alpha);
    let (mut lo, mut hi) = (1.0, cfg.alpha_max);
    if witnessed(hi) {
        lo = hi;
    }
    while hi - lo > cfg.tolerance * lo {
        let mid = 0.5 * (lo + hi);
        if witnessed(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let witnesses = per_radius
        .into_iter()
        .map(|(radius, _, point)| Witness { radius, point })
        .collect();
    Ok(IncreaseEstimate {
        x: x.clone(),
        alpha_lo: lo,
        alpha_hi: hi,
        delta_used: cfg.radii[0] * scale,
        witnesses,
        mode,
    })
}

/// Re-checks every witness of an estimate with the independent inclusion test.
pub fn verify_witnesses(
    map: &dyn SetMap,
    cone: &PolyCone,
    est: &IncreaseEstimate,
) -> Result<bool> {
    let g = mode_map(map, est.mode);
    let target = SumSet::new(g.eval(&est.x)?, Some(cone.clone()))?;
    let dirs = default_direction_count(cone.dim());
    for w in &est.witnesses {
        if (&w.point - &est.x).norm() > w.radius * (1.0 + 1e-12) {
            return Ok(false);
        }
        let gu = g.eval(&w.point)?;
        let inc = enlargement_inclusion(&gu, est.alpha_lo * w.radius, &target, w.radius, dirs)?;
        if !inc.holds() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Box from which decision points are drawn for global estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSampling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEstimate {
    /// Minimum `alpha_lo` over the retained samples.
    pub value: f64,
    pub samples: usize,
    pub argmin_p: f64,
    pub argmin_x: Vector,
}

/// Sampled infimum of the increase (or decrease) bound over a parameter grid
/// and decision points where the map value is not already inside the cone.
/// With `within_constraint`, points are drawn from `R(p)` instead.
pub fn global_infimum(
    family: &dyn MapFamily,
    grid: &[f64],
    points: &PointSampling,
    cfg: &SamplingConfig,
    mode: Mode,
    within_constraint: bool,
) -> Result<GlobalEstimate> {
    if grid.is_empty() {
        return Err(Error::InvalidData("parameter grid is empty".into()));
    }
    let n = family.input_dim();
    if points.lower.len() != n || points.upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: points.lower.len(),
        });
    }
    let lo = Vector::from_column_slice(&points.lower);
    let hi = Vector::from_column_slice(&points.upper);
    let cone_set = SumSet::cone(family.cone().clone());

    let mut jobs = Vec::new();
    for (k, &p) in grid.iter().enumerate() {
        let xs = if within_constraint {
            family
                .constraint_at(p)?
                .sample(points.count, (&lo, &hi), k as u64 * points.count as u64)?
        } else {
            crate::sampling::halton_box(&lo, &hi, points.count, k as u64 * points.count as u64)
        };
        jobs.extend(xs.into_iter().map(|x| (p, x)));
    }

    let results: Vec<Option<(f64, f64, Vector)>> = jobs
        .par_iter()
        .map(|(p, x)| -> Result<Option<(f64, f64, Vector)>> {
            let map = family.map_at(*p)?;
            let g = mode_map(map.as_ref(), mode);
            if excess(&g.eval(x)?, &cone_set)? <= cfg.tolerance {
                return Ok(None);
            }
            let est = estimate_bound(map.as_ref(), family.cone(), x, cfg, mode)?;
            Ok(Some((est.alpha_lo, *p, x.clone())))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64, Vector)> = None;
    let mut samples = 0;
    for (a, p, x) in results.into_iter().flatten() {
        samples += 1;
        if best.as_ref().map_or(true, |(b, _, _)| a < *b) {
            best = Some((a, p, x));
        }
    }
    let (value, argmin_p, argmin_x) = best.ok_or_else(|| {
        Error::InvalidData("no sample point lies outside the solution set".into())
    })?;
    Ok(GlobalEstimate {
        value,
        samples,
        argmin_p,
        argmin_x,
    })
}

/// Lower bound `(1 - ell) * base_inc` for an `ell`-Lipschitz perturbation.
pub fn perturbed_bound(base_inc: f64, ell: f64) -> Result<f64> {
    if !(base_inc > 1.0) || !(ell >= 0.0) {
        return Err(Error::InvalidData(format!(
            "need base_inc > 1 and ell >= 0 (got {base_inc}, {ell})"
        )));
    }
    if ell >= 1.0 - 1.0 / base_inc {
        return Err(Error::HypothesisViolated(format!(
            "perturbation constant {ell} is not below 1 - 1/{base_inc} = {}",
            1.0 - 1.0 / base_inc
        )));
    }
    Ok((1.0 - ell) * base_inc)
}

/// Whether `G(x) ⊆ C` up to the geometric tolerance.
pub fn is_solution(map: &dyn SetMap, cone: &PolyCone, x: &Vector) -> Result<bool> {
    Ok(excess(&map.eval(x)?, &SumSet::cone(cone.clone()))? <= GEOM_TOL)
}
