//! Ideal efficiency for parametric vector optimization.
//!
//! A feasible `x` is ideal at `p` when `f(p, R(p)) - f(p, x) ⊆ C`, i.e. when
//! `x` solves the set-valued inclusion for `Phi(p, x) = f(p, R(p)) - f(p, x)`.
//! The image `f(p, R(p))` is represented by a finite sample: vertex images for
//! affine objectives over polytopes, the nearest point to the kink for
//! deviation objectives, and a grid otherwise.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{excess, Matrix, PolyCone, SumSet, VPolytope, Vector};
use crate::increase::{global_infimum, Mode, PointSampling, SamplingConfig};
use crate::parametric::{problem_hash, validate_grid, SweepMeta, SweepRow, SweepTable};
use crate::setmaps::{
    operator_norm, rotation, ConstraintFamily, ConstraintSet, MapFamily, ParamMatrixFamily,
    SetMap,
};
use crate::solver::{constrained_interval, solve_constrained, solve_projected, SolveResult, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorKnot {
    pub p: f64,
    pub value: Vec<f64>,
}

/// Piecewise-linear vector path through knots strictly increasing in `p`;
/// a single knot is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorPath {
    pub knots: Vec<VectorKnot>,
}

impl VectorPath {
    pub fn constant(value: Vec<f64>) -> Self {
        VectorPath {
            knots: vec![VectorKnot { p: 0.0, value }],
        }
    }

    /// Samples `g` at `count` evenly spaced knots over `[lo, hi]`.
    pub fn sampled(lo: f64, hi: f64, count: usize, g: impl Fn(f64) -> Vec<f64>) -> Self {
        VectorPath {
            knots: crate::sampling::linspace(lo, hi, count)
                .into_iter()
                .map(|p| VectorKnot { p, value: g(p) })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.knots.first().map_or(0, |k| k.value.len())
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidData("vector path needs a nonempty knot".into()));
        }
        for k in &self.knots {
            check_dim(n, k.value.len())?;
            if !k.p.is_finite() || k.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite knot".into()));
            }
        }
        if self.knots.windows(2).any(|w| !(w[1].p > w[0].p)) {
            return Err(Error::InvalidData("path knots must increase in p".into()));
        }
        Ok(())
    }

    pub fn at(&self, p: f64) -> Result<Vector> {
        let k = &self.knots;
        if k.len() == 1 {
            return Ok(Vector::from_column_slice(&k[0].value));
        }
        let (lo, hi) = (k[0].p, k[k.len() - 1].p);
        if !(p >= lo && p <= hi) {
            return Err(Error::ParameterOutOfRange { p, lo, hi });
        }
        let i = k.windows(2).position(|w| p <= w[1].p).unwrap_or(k.len() - 2);
        let t = (p - k[i].p) / (k[i + 1].p - k[i].p);
        Ok(Vector::from_iterator(
            self.dim(),
            k[i].value.iter().zip(&k[i + 1].value).map(|(a, b)| a * (1.0 - t) + b * t),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    /// `lambda O_p x`, or `lambda O_p^T x` when `clockwise`.
    LinearRotation { lambda: f64, clockwise: bool },
    /// Every component equal to `|x - center(p)|`.
    AbsDeviation { center: VectorPath },
    /// `M(p) x + offset(p)`.
    AffineFamily {
        matrix: ParamMatrixFamily,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<VectorPath>,
    },
}

impl Objective {
    fn is_affine(&self) -> bool {
        !matches!(self, Objective::AbsDeviation { .. })
    }

    fn input_dim(&self) -> usize {
        match self {
            Objective::LinearRotation { .. } => 2,
            Objective::AbsDeviation { center } => center.dim(),
            Objective::AffineFamily { matrix, .. } => matrix.shape().1,
        }
    }

    fn rotation_angle(&self, p: f64) -> Option<f64> {
        match self {
            Objective::LinearRotation { clockwise, .. } => Some(if *clockwise { -p } else { p }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VopSpecRepr")]
pub struct VopSpec {
    pub objective: Objective,
    #[serde(default)]
    pub constraint: ConstraintFamily,
    pub cone: PolyCone,
    pub objective_lipschitz: f64,
    /// Grid points per axis when `f(p, R(p))` has to be grid-sampled.
    #[serde(default = "default_image_density")]
    pub image_density: usize,
}

fn default_image_density() -> usize {
    33
}

#[derive(Deserialize)]
struct VopSpecRepr {
    objective: Objective,
    #[serde(default)]
    constraint: ConstraintFamily,
    cone: PolyCone,
    objective_lipschitz: f64,
    #[serde(default = "default_image_density")]
    image_density: usize,
}

impl TryFrom<VopSpecRepr> for VopSpec {
    type Error = Error;
    fn try_from(r: VopSpecRepr) -> Result<Self> {
        VopSpec {
            objective: r.objective,
            constraint: r.constraint,
            cone: r.cone,
            objective_lipschitz: r.objective_lipschitz,
            image_density: r.image_density,
        }
        .validated()
    }
}

impl VopSpec {
    pub fn validated(self) -> Result<Self> {
        if !self.cone.is_pointed() {
            return Err(Error::InvalidData("the ordering cone must be pointed".into()));
        }
        let m = self.cone.dim();
        let n = self.objective.input_dim();
        match &self.objective {
            Objective::LinearRotation { lambda, .. } => {
                check_dim(2, m)?;
                if !lambda.is_finite() {
                    return Err(Error::InvalidData("rotation scale must be finite".into()));
                }
            }
            Objective::AbsDeviation { center } => center.validate()?,
            Objective::AffineFamily { matrix, offset } => {
                check_dim(m, matrix.shape().0)?;
                if let Some(off) = offset {
                    off.validate()?;
                    check_dim(m, off.dim())?;
                }
            }
        }
        match &self.constraint {
            ConstraintFamily::AllSpace => {}
            ConstraintFamily::Box { lower, .. } => check_dim(n, lower.len())?,
            ConstraintFamily::Ball { center, .. } => check_dim(n, center.len())?,
            ConstraintFamily::Polytope { polytope } => check_dim(n, polytope.dim())?,
        }
        if !(self.objective_lipschitz >= 0.0 && self.objective_lipschitz.is_finite()) {
            return Err(Error::InvalidData("objective Lipschitz constant must be finite".into()));
        }
        if let Some(bound) = self.lipschitz_lower_bound() {
            if self.objective_lipschitz < bound - 1e-12 {
                return Err(Error::InvalidData(format!(
                    "declared objective Lipschitz constant {} is below {bound}",
                    self.objective_lipschitz
                )));
            }
        }
        if self.image_density < 2 {
            return Err(Error::InvalidData("image density must be at least 2".into()));
        }
        Ok(self)
    }

    /// A value the objective's Lipschitz constant cannot be below.
    fn lipschitz_lower_bound(&self) -> Option<f64> {
        match &self.objective {
            Objective::LinearRotation { lambda, .. } => Some(lambda.abs()),
            Objective::AbsDeviation { .. } => Some((self.cone.dim() as f64).sqrt()),
            Objective::AffineFamily { matrix, .. } => match matrix {
                ParamMatrixFamily::InterpolatedTable { knots } => Some(
                    knots.iter().map(|k| operator_norm(&k.matrix.0)).fold(0.0, f64::max),
                ),
                other => other.at(0.0).ok().map(|m| operator_norm(&m)),
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        self.objective.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.cone.dim()
    }

    /// `f(p, x)`.
    pub fn objective_at(&self, p: f64, x: &Vector) -> Result<Vector> {
        check_dim(self.input_dim(), x.len())?;
        let m = self.output_dim();
        Ok(match &self.objective {
            Objective::LinearRotation { lambda, clockwise } => {
                let theta = if *clockwise { -p } else { p };
                &rotation(theta) * x * *lambda
            }
            Objective::AbsDeviation { center } => {
                Vector::from_element(m, (x - center.at(p)?).norm())
            }
            Objective::AffineFamily { matrix, offset } => {
                let mut y = &matrix.at(p)? * x;
                if let Some(off) = offset {
                    y += off.at(p)?;
                }
                y
            }
        })
    }

    /// Points of `R(p)` whose images represent `f(p, R(p))`.
    pub fn image_samples(&self, p: f64, density: usize) -> Result<Vec<Vector>> {
        let set = self.constraint.at(p)?;
        let all_ones_in_cone = self.cone.contains(&Vector::from_element(self.output_dim(), 1.0))?;
        match (&self.objective, &set) {
            (Objective::AbsDeviation { center }, ConstraintSet::All) => {
                // The image is {t (1,..,1) : t >= 0}; its excess beyond any
                // translate of C is attained at t = 0 when (1,..,1) ∈ C.
                if !all_ones_in_cone {
                    return Err(Error::UnsupportedCombination(
                        "deviation objective over all space needs (1,..,1) in the cone".into(),
                    ));
                }
                Ok(vec![center.at(p)?])
            }
            (_, ConstraintSet::All) => Err(Error::UnsupportedCombination(
                "an affine objective over all space has an unbounded image".into(),
            )),
            (obj, ConstraintSet::Box { .. } | ConstraintSet::Polytope(_)) if obj.is_affine() => {
                Ok(set.vertices().expect("polytopal constraint"))
            }
            (obj, _) => {
                let mut samples = set.grid(density)?;
                if let Objective::AbsDeviation { center } = obj {
                    samples.push(set.project(&center.at(p)?)?);
                }
                Ok(samples)
            }
        }
    }

    /// `x -> Phi(p, x)` with the given image sampling density.
    pub fn build_vop_problem(&self, p: f64, image_sampling: usize) -> Result<VopMap<'_>> {
        let samples = self.image_samples(p, image_sampling)?;
        let images = samples
            .iter()
            .map(|s| self.objective_at(p, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(VopMap {
            spec: self,
            p,
            images,
        })
    }

    pub fn objective_map(&self, p: f64) -> ObjectiveAt<'_> {
        ObjectiveAt { spec: self, p }
    }
}

/// `Phi(p, .) = f(p, sample(R(p))) - f(p, .)`.
pub struct VopMap<'a> {
    spec: &'a VopSpec,
    p: f64,
    images: Vec<Vector>,
}

impl VopMap<'_> {
    pub fn image_count(&self) -> usize {
        self.images.len()
    }
}

impl SetMap for VopMap<'_> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }
    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        let fx = self.spec.objective_at(self.p, x)?;
        VPolytope::new(self.images.iter().map(|y| y - &fx).collect())
    }
}

/// `x -> {f(p, x)}`.
pub struct ObjectiveAt<'a> {
    spec: &'a VopSpec,
    p: f64,
}

impl SetMap for ObjectiveAt<'_> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }
    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        VPolytope::singleton(self.spec.objective_at(self.p, x)?)
    }
    fn witness_hints(&self, _x: &Vector) -> Vec<Vector> {
        match self.spec.objective.rotation_angle(self.p) {
            Some(theta) => vec![&rotation(std::f64::consts::FRAC_PI_4 - theta) * Vector::from_column_slice(&[1.0, 0.0])],
            None => Vec::new(),
        }
    }
}

/// The objectives `f(p, .)` as a map family, for decrease estimates.
pub struct ObjectiveFamily<'a>(pub &'a VopSpec);

impl MapFamily for ObjectiveFamily<'_> {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn map_at<'a>(&'a self, p: f64) -> Result<Box<dyn SetMap + 'a>> {
        Ok(Box::new(self.0.objective_map(p)))
    }
    fn cone(&self) -> &PolyCone {
        &self.0.cone
    }
    fn constraint_at(&self, p: f64) -> Result<ConstraintSet> {
        self.0.constraint.at(p)
    }
}

/// `Phi(p, .)` as a map family.
pub struct PhiFamily<'a> {
    pub spec: &'a VopSpec,
    pub density: usize,
}

impl MapFamily for PhiFamily<'_> {
    fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }
    fn map_at<'a>(&'a self, p: f64) -> Result<Box<dyn SetMap + 'a>> {
        Ok(Box::new(self.spec.build_vop_problem(p, self.density)?))
    }
    fn cone(&self) -> &PolyCone {
        &self.spec.cone
    }
    fn constraint_at(&self, p: f64) -> Result<ConstraintSet> {
        self.spec.constraint.at(p)
    }
}

/// Sampled lower decrease constant of the objective over `grid` and points of
/// `R(p)` (or of `window` when the constraint is all space).
pub fn estimate_alpha_lower(
    spec: &VopSpec,
    grid: &[f64],
    window: &PointSampling,
    cfg: &SamplingConfig,
) -> Result<f64> {
    let within = !spec.constraint.is_all_space();
    Ok(global_infimum(&ObjectiveFamily(spec), grid, window, cfg, Mode::Decrease, within)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VopConfig {
    pub solver: SolverConfig,
    /// Lower decrease constant of the objective; required by `solve_ideal`.
    pub alpha_lower: Option<f64>,
    /// Descent constant for the projected fallback used when the constrained
    /// hypotheses cannot be met.
    pub fallback_k: f64,
    /// Grid density for the brute-force oracle, when rows should carry an
    /// oracle verdict.
    pub oracle_density: Option<usize>,
}

impl Default for VopConfig {
    fn default() -> Self {
        VopConfig {
            // Where no ideal point exists the descent only creeps toward
            // the minimum of the merit; a modest budget bounds that cost.
            solver: SolverConfig {
                tol: 1e-10,
                max_iters: 200,
                ..SolverConfig::default()
            },
            alpha_lower: None,
            fallback_k: 0.05,
            oracle_density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdealStatus {
    Found { x: Vector, value: Vector },
    NotFoundAfterBudget,
    /// Descent failed and the brute-force oracle found no ideal point.
    CertifiedEmpty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealResult {
    pub status: IdealStatus,
    pub merit_final: f64,
    /// Whether `ell < alpha_lower - 1`, so the constrained scheme and its
    /// error bound apply; otherwise the projected fallback ran.
    pub hypotheses_hold: bool,
    pub solve: Option<SolveResult>,
    /// Last iterate of the descent, found or not.
    pub last_x: Vector,
}

impl IdealResult {
    pub fn found(&self) -> Option<(&Vector, &Vector)> {
        match &self.status {
            IdealStatus::Found { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

/// Lipschitz constant that enters the constrained scheme: the objective's,
/// or zero when there is no region outside the constraint.
fn effective_ell(spec: &VopSpec) -> f64 {
    if spec.constraint.is_all_space() {
        0.0
    } else {
        spec.objective_lipschitz
    }
}

/// Searches an ideal efficient point at `p` starting from `x0`.
pub fn solve_ideal(spec: &VopSpec, p: f64, x0: &Vector, cfg: &VopConfig) -> Result<IdealResult> {
    let alpha_lower = cfg.alpha_lower.ok_or_else(|| {
        Error::InvalidConfig("solve_ideal needs alpha_lower (see estimate_alpha_lower)".into())
    })?;
    let phi = spec.build_vop_problem(p, spec.image_density)?;
    let cone = SumSet::cone(spec.cone.clone());
    let merit = |x: &Vector| -> Result<f64> { excess(&phi.eval(x)?, &cone) };
    let constraint = spec.constraint.at(p)?;
    let ell = effective_ell(spec);

    let (outcome, hypotheses_hold) = match constrained_interval(alpha_lower, ell) {
        Ok((lo, hi)) => {
            let scfg = SolverConfig {
                alpha: 0.5 * (lo + hi),
                alpha_tilde: Some(alpha_lower),
                ell,
                ..cfg.solver.clone()
            };
            (solve_constrained(&merit, &constraint, x0, &scfg), true)
        }
        Err(Error::HypothesisViolated(msg)) => {
            log::debug!("p = {p}: {msg}; using projected descent");
            (solve_projected(&merit, &constraint, x0, cfg.fallback_k, &cfg.solver), false)
        }
        Err(e) => return Err(e),
    };

    match outcome {
        Ok(res) if res.merit_final <= cfg.solver.tol => {
            let x = res.x_final.clone();
            let value = spec.objective_at(p, &x)?;
            Ok(IdealResult {
                status: IdealStatus::Found { x: x.clone(), value },
                merit_final: res.merit_final,
                hypotheses_hold,
                solve: Some(res),
                last_x: x,
            })
        }
        Ok(res) => Ok(IdealResult {
            status: IdealStatus::NotFoundAfterBudget,
            merit_final: res.merit_final,
            hypotheses_hold,
            last_x: res.x_final.clone(),
            solve: Some(res),
        }),
        Err(e) if e.is_solver_failure() => {
            let last_x = e.last_iterate().unwrap_or_else(|| x0.clone());
            let merit_final = merit(&last_x)?;
            let mut status = IdealStatus::NotFoundAfterBudget;
            if let Some(density) = cfg.oracle_density {
                if brute_force_ideal(spec, p, density)?.outcome == OracleOutcome::Empty {
                    status = IdealStatus::CertifiedEmpty;
                }
            }
            Ok(IdealResult {
                status,
                merit_final,
                hypotheses_hold,
                solve: None,
                last_x,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    /// One ideal point, its value, and every ideal candidate found.
    Ideal { x: Vector, value: Vector, all: Vec<Vector> },
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub outcome: OracleOutcome,
    /// The verdict changed between `density` and `2 density`.
    pub grid_too_coarse: bool,
}

const ORACLE_TOL: f64 = 1e-9;

fn oracle_candidates(spec: &VopSpec, p: f64, density: usize) -> Result<Vec<Vector>> {
    let set = spec.constraint.at(p)?;
    let mut cands = match &set {
        ConstraintSet::All => {
            let Objective::AbsDeviation { center } = &spec.objective else {
                return Err(Error::UnsupportedCombination(
                    "brute force over all space needs a deviation objective".into(),
                ));
            };
            // A window of half-width 2 around the kink.
            let c = center.at(p)?;
            ConstraintSet::Box {
                lower: c.map(|v| v - 2.0),
                upper: c.map(|v| v + 2.0),
            }
            .grid(density)?
        }
        _ => set.grid(density)?,
    };
    if let Objective::AbsDeviation { center } = &spec.objective {
        cands.push(set.project(&center.at(p)?)?);
    }
    Ok(cands)
}

fn oracle_once(spec: &VopSpec, p: f64, density: usize) -> Result<OracleOutcome> {
    let cands = oracle_candidates(spec, p, density)?;
    let values = cands
        .iter()
        .map(|s| spec.objective_at(p, s))
        .collect::<Result<Vec<_>>>()?;
    let cone = SumSet::cone(spec.cone.clone());
    let mut ideal = Vec::new();
    for (x, fx) in cands.iter().zip(&values) {
        let mut ok = true;
        for fs in &values {
            if crate::geometry::project_dist(&(fs - fx), &cone)?.distance > ORACLE_TOL {
                ok = false;
                break;
            }
        }
        if ok {
            ideal.push((x.clone(), fx.clone()));
        }
    }
    Ok(match ideal.first() {
        None => OracleOutcome::Empty,
        Some((x, v)) => OracleOutcome::Ideal {
            x: x.clone(),
            value: v.clone(),
            all: ideal.iter().map(|(x, _)| x.clone()).collect(),
        },
    })
}

/// Exhaustive ideal-point test over the vertices and a grid of `R(p)`: a
/// candidate is ideal when every candidate's value dominates it.
pub fn brute_force_ideal(spec: &VopSpec, p: f64, grid_density: usize) -> Result<OracleReport> {
    let coarse = oracle_once(spec, p, grid_density)?;
    let fine = oracle_once(spec, p, 2 * grid_density - 1)?;
    let same = matches!(
        (&coarse, &fine),
        (OracleOutcome::Empty, OracleOutcome::Empty) | (OracleOutcome::Ideal { .. }, OracleOutcome::Ideal { .. })
    );
    if !same {
        log::warn!("p = {p}: oracle verdict changes between densities {grid_density} and {}", 2 * grid_density - 1);
    }
    Ok(OracleReport {
        outcome: fine,
        grid_too_coarse: !same,
    })
}

/// Warm-started `solve_ideal` along `grid`; rows carry `val(p) = f(p, x(p))`.
pub fn ideal_value_sweep(spec: &VopSpec, grid: &[f64], x_init: &Vector, cfg: &VopConfig) -> Result<SweepTable> {
    validate_grid(grid)?;
    let started = Instant::now();
    // Oracle rows are independent of each other and of the warm start.
    let verdicts: Vec<Option<String>> = grid
        .par_iter()
        .map(|&p| -> Result<Option<String>> {
            let Some(d) = cfg.oracle_density else { return Ok(None) };
            Ok(Some(match brute_force_ideal(spec, p, d)?.outcome {
                OracleOutcome::Ideal { .. } => "ideal".to_string(),
                OracleOutcome::Empty => "empty".to_string(),
            }))
        })
        .collect::<Result<_>>()?;
    let mut warm = x_init.clone();
    let mut rows = Vec::with_capacity(grid.len());
    for (&p, oracle_status) in grid.iter().zip(verdicts) {
        let res = solve_ideal(spec, p, &warm, cfg)?;
        let (bound_rhs, bound_holds, iterations) = match &res.solve {
            Some(s) => (s.bound_rhs, s.bound_holds, s.iterations),
            None => (f64::NAN, false, 0),
        };
        let row = match &res.status {
            IdealStatus::Found { x, value } => {
                warm = x.clone();
                SweepRow {
                    p,
                    x: x.clone(),
                    merit: res.merit_final,
                    bound_rhs,
                    bound_holds,
                    solved: true,
                    iterations,
                    start: warm.clone(),
                    value: Some(value.clone()),
                    oracle_status,
                }
            }
            _ => SweepRow {
                p,
                x: res.last_x.clone(),
                merit: res.merit_final,
                bound_rhs,
                bound_holds,
                solved: false,
                iterations,
                start: warm.clone(),
                value: Some(spec.objective_at(p, &res.last_x)?),
                oracle_status,
            },
        };
        rows.push(row);
    }
    Ok(SweepTable {
        rows,
        meta: SweepMeta {
            problem_hash: problem_hash(spec),
            cfg: cfg.solver.clone(),
            wall_time: started.elapsed(),
        },
    })
}

/// Identity matrix objective helper used by tests and examples.
pub fn identity_objective(n: usize) -> Objective {
    Objective::AffineFamily {
        matrix: ParamMatrixFamily::Constant {
            matrix: crate::setmaps::DenseMatrix(Matrix::identity(n, n)),
        },
        offset: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::geometry::vector;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn triangle_evaluator_at_origin_lists_vertex_images() {
        let spec = catalog::triangle_vop(true);
        let phi = spec.build_vop_problem(0.0, 9).unwrap();
        let v = phi.eval(&vector(&[0.0, 0.0])).unwrap();
        assert_eq!(v.vertices().len(), 3);
        for (got, want) in v.vertices().iter().zip([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]) {
            assert!((got - vector(&want)).norm() < 1e-15);
        }
    }

    #[test]
    fn deviation_at_center_is_ideal() {
        let spec = VopSpec {
            objective: Objective::AbsDeviation {
                center: VectorPath::constant(vec![0.0]),
            },
            constraint: ConstraintFamily::Box {
                lower: vec![-1.0],
                upper: vec![1.0],
                knots: vec![],
            },
            cone: PolyCone::nonnegative_orthant(2),
            objective_lipschitz: 2f64.sqrt(),
            image_density: 21,
        }
        .validated()
        .unwrap();
        let phi = spec.build_vop_problem(0.0, 21).unwrap();
        let v = phi.eval(&vector(&[0.0])).unwrap();
        for y in v.vertices() {
            assert!(y[0] >= 0.0 && (y[0] - y[1]).abs() < 1e-15);
        }
        assert_eq!(excess(&v, &SumSet::cone(spec.cone.clone())).unwrap(), 0.0);
    }

    #[test]
    fn identity_objective_on_box() {
        let spec = VopSpec {
            objective: identity_objective(2),
            constraint: ConstraintFamily::Box {
                lower: vec![0.0, 0.0],
                upper: vec![1.0, 1.0],
                knots: vec![],
            },
            cone: PolyCone::nonnegative_orthant(2),
            objective_lipschitz: 1.0,
            image_density: 5,
        }
        .validated()
        .unwrap();
        let v = spec.build_vop_problem(0.0, 5).unwrap().eval(&vector(&[0.0, 0.0])).unwrap();
        assert_eq!(v.vertices().len(), 4);
        assert!(v.vertices().iter().all(|y| y.iter().all(|c| *c >= 0.0)));
    }

    #[test]
    fn oracle_on_triangle() {
        let spec = catalog::triangle_vop(true);
        match brute_force_ideal(&spec, 0.0, 9).unwrap().outcome {
            OracleOutcome::Ideal { x, .. } => assert!(x.norm() < 1e-12),
            OracleOutcome::Empty => panic!("ideal point expected at p = 0"),
        }
        assert_eq!(brute_force_ideal(&spec, PI, 9).unwrap().outcome, OracleOutcome::Empty);
    }

    #[test]
    fn oracle_on_deviation_grid() {
        let spec = VopSpec {
            objective: Objective::AbsDeviation {
                center: VectorPath::constant(vec![0.3]),
            },
            constraint: ConstraintFamily::Box {
                lower: vec![-1.0],
                upper: vec![1.0],
                knots: vec![],
            },
            cone: PolyCone::nonnegative_orthant(2),
            objective_lipschitz: 2f64.sqrt(),
            image_density: 21,
        };
        match brute_force_ideal(&spec, 0.0, 201).unwrap().outcome {
            OracleOutcome::Ideal { x, value, .. } => {
                assert!((x[0] - 0.3).abs() < 1e-12);
                assert!(value.norm() < 1e-12);
            }
            OracleOutcome::Empty => panic!("ideal point expected"),
        }
    }

    #[test]
    fn solve_ideal_triangle() {
        let spec = catalog::triangle_vop(true);
        let cfg = VopConfig {
            alpha_lower: Some(1.0 / 2f64.sqrt() + 1.0),
            oracle_density: Some(9),
            ..VopConfig::default()
        };
        let x0 = vector(&[1.0 / 3.0, 1.0 / 3.0]);
        let res = solve_ideal(&spec, 0.0, &x0, &cfg).unwrap();
        assert!(!res.hypotheses_hold);
        let (x, _) = res.found().expect("ideal point at p = 0");
        assert!(x.norm() < 1e-6);
        let res = solve_ideal(&spec, PI, &x0, &cfg).unwrap();
        assert_eq!(res.status, IdealStatus::CertifiedEmpty);
    }

    #[test]
    fn solve_ideal_deviation() {
        let spec = catalog::sine_deviation_vop();
        let cfg = VopConfig {
            alpha_lower: Some(2.0),
            ..VopConfig::default()
        };
        // Knots of the center path, where it equals sin exactly.
        for k in [0, 41, 100] {
            let p = TAU * k as f64 / 256.0;
            let res = solve_ideal(&spec, p, &vector(&[0.0]), &cfg).unwrap();
            let (x, value) = res.found().expect("ideal point");
            assert!((x[0] - p.sin()).abs() < 1e-6);
            assert!(value.norm() < 1e-9);
            assert!(res.hypotheses_hold);
            assert!(res.solve.unwrap().bound_holds);
        }
    }

    #[test]
    fn pointed_cone_required() {
        let mut spec = catalog::triangle_vop(true);
        spec.cone = PolyCone::new(vec![vector(&[1.0, 0.0]), vector(&[-1.0, 0.0]), vector(&[0.0, 1.0])]).unwrap();
        assert!(spec.validated().is_err());
    }

    #[test]
    fn affine_over_all_space_is_rejected() {
        let mut spec = catalog::triangle_vop(true);
        spec.constraint = ConstraintFamily::AllSpace;
        assert!(matches!(spec.build_vop_problem(0.0, 5), Err(Error::UnsupportedCombination(_))));
    }
}
