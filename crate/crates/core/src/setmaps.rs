//! Problem data: parametric set-valued maps `F(p, x) = M(p) x + h(x) + H_L(x)`,
//! constraint families `R(p)` and the merit functions built on them.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{excess, project_dist, Matrix, PolyCone, SumSet, VPolytope, Vector};
use crate::sampling::halton_box;

/// A map `x -> G(x)` with polytope values.
pub trait SetMap: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Result<VPolytope>;

    /// Unit directions along which a good increase witness is known to lie.
    fn witness_hints(&self, _x: &Vector) -> Vec<Vector> {
        Vec::new()
    }
}

impl<M: SetMap + ?Sized> SetMap for &M {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        (**self).eval(x)
    }
    fn witness_hints(&self, x: &Vector) -> Vec<Vector> {
        (**self).witness_hints(x)
    }
}

impl<M: SetMap + ?Sized> SetMap for Box<M> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        (**self).eval(x)
    }
    fn witness_hints(&self, x: &Vector) -> Vec<Vector> {
        (**self).witness_hints(x)
    }
}

/// `x -> -G(x)`. Decrease of `G` is increase of this map.
pub struct Negated<M>(pub M);

impl<M: SetMap> SetMap for Negated<M> {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.0.output_dim()
    }
    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        Ok(self.0.eval(x)?.negated())
    }
    fn witness_hints(&self, x: &Vector) -> Vec<Vector> {
        // Exact for linear maps: negating the image negates the useful step.
        self.0.witness_hints(x).into_iter().map(|d| -d).collect()
    }
}

/// A parameter-indexed family of set-valued maps sharing one cone, with a
/// constraint family on the decision variable.
pub trait MapFamily: Sync {
    fn input_dim(&self) -> usize;
    fn map_at<'a>(&'a self, p: f64) -> Result<Box<dyn SetMap + 'a>>;
    fn cone(&self) -> &PolyCone;
    fn constraint_at(&self, p: f64) -> Result<ConstraintSet>;
}

/// Merit value `exc(G(x), C)`.
pub fn merit_of(map: &dyn SetMap, cone: &SumSet, x: &Vector) -> Result<f64> {
    excess(&map.eval(x)?, cone)
}

/// Dense matrix stored as a list of rows on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix(pub Matrix);

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if nrows == 0 || ncols == 0 {
            return Err(Error::InvalidData("matrix must be nonempty".into()));
        }
        for r in &rows {
            check_dim(ncols, r.len())?;
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite matrix entry".into()));
            }
        }
        Ok(DenseMatrix(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])))
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

pub fn rotation(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

pub fn operator_norm(m: &Matrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Compactly generated fan `x -> { L x : L in conv(extreme_matrices) }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanSpec {
    pub extreme_matrices: Vec<DenseMatrix>,
}

impl FanSpec {
    pub fn new(extreme_matrices: Vec<Matrix>) -> Result<Self> {
        let fan = FanSpec {
            extreme_matrices: extreme_matrices.into_iter().map(DenseMatrix).collect(),
        };
        fan.validate()?;
        Ok(fan)
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .extreme_matrices
            .first()
            .ok_or_else(|| Error::InvalidData("fan needs at least one matrix".into()))?;
        for m in &self.extreme_matrices {
            check_dim(first.0.nrows(), m.0.nrows())?;
            check_dim(first.0.ncols(), m.0.ncols())?;
        }
        Ok(())
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.extreme_matrices
            .iter()
            .map(|m| operator_norm(&m.0))
            .fold(0.0, f64::max)
    }

    pub fn shape(&self) -> (usize, usize) {
        let m = &self.extreme_matrices[0].0;
        (m.nrows(), m.ncols())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixKnot {
    pub p: f64,
    pub matrix: DenseMatrix,
}

/// Parameter-dependent matrix `M(p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamMatrixFamily {
    /// `lambda * O_p`, or `lambda * O_p^T` when `clockwise`.
    RotationScaled { lambda: f64, clockwise: bool },
    Constant { matrix: DenseMatrix },
    /// Piecewise-linear interpolation between knots strictly increasing in `p`.
    InterpolatedTable { knots: Vec<MatrixKnot> },
}

impl ParamMatrixFamily {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            ParamMatrixFamily::RotationScaled { .. } => (2, 2),
            ParamMatrixFamily::Constant { matrix } => (matrix.0.nrows(), matrix.0.ncols()),
            ParamMatrixFamily::InterpolatedTable { knots } => {
                (knots[0].matrix.0.nrows(), knots[0].matrix.0.ncols())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ParamMatrixFamily::RotationScaled { lambda, .. } if !lambda.is_finite() => {
                Err(Error::InvalidData("rotation scale must be finite".into()))
            }
            ParamMatrixFamily::InterpolatedTable { knots } => {
                let first = knots
                    .first()
                    .ok_or_else(|| Error::InvalidData("matrix table needs a knot".into()))?;
                for w in knots.windows(2) {
                    if !(w[1].p > w[0].p) {
                        return Err(Error::InvalidData(
                            "matrix table knots must be strictly increasing in p".into(),
                        ));
                    }
                }
                for k in knots {
                    check_dim(first.matrix.0.nrows(), k.matrix.0.nrows())?;
                    check_dim(first.matrix.0.ncols(), k.matrix.0.ncols())?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Signed rotation angle applied at `p`, when this is a rotation family.
    pub fn rotation_angle(&self, p: f64) -> Option<f64> {
        match self {
            ParamMatrixFamily::RotationScaled { clockwise, .. } => {
                Some(if *clockwise { -p } else { p })
            }
            _ => None,
        }
    }

    pub fn at(&self, p: f64) -> Result<Matrix> {
        match self {
            ParamMatrixFamily::RotationScaled { lambda, clockwise } => {
                let theta = if *clockwise { -p } else { p };
                Ok(rotation(theta) * *lambda)
            }
            ParamMatrixFamily::Constant { matrix } => Ok(matrix.0.clone()),
            ParamMatrixFamily::InterpolatedTable { knots } => {
                let (lo, hi) = (knots[0].p, knots[knots.len() - 1].p);
                if !(p >= lo && p <= hi) {
                    return Err(Error::ParameterOutOfRange { p, lo, hi });
                }
                if knots.len() == 1 {
                    return Ok(knots[0].matrix.0.clone());
                }
                let i = knots
                    .windows(2)
                    .position(|w| p <= w[1].p)
                    .unwrap_or(knots.len() - 2);
                let (a, b) = (&knots[i], &knots[i + 1]);
                let t = (p - a.p) / (b.p - a.p);
                Ok(&a.matrix.0 * (1.0 - t) + &b.matrix.0 * t)
            }
        }
    }
}

/// `weight * |x[index] - center|` with `weight <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsKink {
    pub index: usize,
    pub weight: f64,
    #[serde(default)]
    pub center: f64,
}

/// One output coordinate of the concave term: `a + <linear, x> + sum of kinks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcaveComponent {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub kinks: Vec<AbsKink>,
}

impl ConcaveComponent {
    fn eval(&self, x: &Vector) -> f64 {
        let lin: f64 = self.linear.iter().zip(x.iter()).map(|(b, xi)| b * xi).sum();
        let abs: f64 = self
            .kinks
            .iter()
            .map(|k| k.weight * (x[k.index] - k.center).abs())
            .sum();
        self.constant + lin + abs
    }
}

/// Componentwise concave, globally Lipschitz single-valued term `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcaveTerm {
    pub components: Vec<ConcaveComponent>,
    pub declared_lipschitz: f64,
}

impl ConcaveTerm {
    pub fn eval(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.components.len(), self.components.iter().map(|c| c.eval(x)))
    }

    /// Certified Lipschitz bound: spectral norm of the entrywise bound on the
    /// Jacobian, `B_ij = |linear_ij| + sum of |weight| over kinks on x_j`.
    pub fn lipschitz_bound(&self, n: usize) -> f64 {
        let b = Matrix::from_fn(self.components.len(), n, |i, j| {
            let c = &self.components[i];
            let lin = c.linear.get(j).copied().unwrap_or(0.0).abs();
            let kinks: f64 = c
                .kinks
                .iter()
                .filter(|k| k.index == j)
                .map(|k| k.weight.abs())
                .sum();
            lin + kinks
        });
        operator_norm(&b)
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        check_dim(m, self.components.len())?;
        for c in &self.components {
            if !c.linear.is_empty() {
                check_dim(n, c.linear.len())?;
            }
            let finite = c.constant.is_finite() && c.linear.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidData("non-finite concave term".into()));
            }
            for k in &c.kinks {
                if k.index >= n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: k.index + 1,
                    });
                }
                if !(k.weight <= 0.0) || !k.center.is_finite() {
                    return Err(Error::InvalidData(
                        "abs-kink weights must be <= 0 for concavity".into(),
                    ));
                }
            }
        }
        if !self.declared_lipschitz.is_finite() {
            return Err(Error::InvalidData("declared Lipschitz constant must be finite".into()));
        }
        let bound = self.lipschitz_bound(n);
        if self.declared_lipschitz < bound - 1e-12 {
            return Err(Error::InvalidData(format!(
                "declared Lipschitz constant {} is below the certified bound {bound}",
                self.declared_lipschitz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxKnot {
    pub p: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallKnot {
    pub p: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Constraint family `R(p)`. Box and ball move piecewise-linearly in `p` when
/// knots are given; otherwise they are constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintFamily {
    #[default]
    AllSpace,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        knots: Vec<BoxKnot>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        knots: Vec<BallKnot>,
    },
    Polytope {
        polytope: VPolytope,
    },
}

fn knot_segment<T>(knots: &[T], p: f64, key: impl Fn(&T) -> f64) -> Result<(usize, f64)> {
    let (lo, hi) = (key(&knots[0]), key(&knots[knots.len() - 1]));
    if !(p >= lo && p <= hi) {
        return Err(Error::ParameterOutOfRange { p, lo, hi });
    }
    if knots.len() == 1 {
        return Ok((0, 0.0));
    }
    let i = knots
        .windows(2)
        .position(|w| p <= key(&w[1]))
        .unwrap_or(knots.len() - 2);
    let t = (p - key(&knots[i])) / (key(&knots[i + 1]) - key(&knots[i]));
    Ok((i, t))
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vector {
    Vector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| x * (1.0 - t) + y * t))
}

impl ConstraintFamily {
    pub fn is_all_space(&self) -> bool {
        matches!(self, ConstraintFamily::AllSpace)
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check_box = |lo: &[f64], hi: &[f64]| -> Result<()> {
            check_dim(n, lo.len())?;
            check_dim(n, hi.len())?;
            if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
                return Err(Error::InvalidData("box needs finite lower <= upper".into()));
            }
            Ok(())
        };
        let check_ball = |c: &[f64], r: f64| -> Result<()> {
            check_dim(n, c.len())?;
            if !(r >= 0.0 && r.is_finite()) || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("ball needs a finite center and radius >= 0".into()));
            }
            Ok(())
        };
        let increasing = |ps: Vec<f64>| -> Result<()> {
            if ps.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidData("constraint knots must increase in p".into()));
            }
            Ok(())
        };
        match self {
            ConstraintFamily::AllSpace => Ok(()),
            ConstraintFamily::Box {
                lower,
                upper,
                knots,
            } => {
                check_box(lower, upper)?;
                for k in knots {
                    check_box(&k.lower, &k.upper)?;
                }
                increasing(knots.iter().map(|k| k.p).collect())
            }
            ConstraintFamily::Ball {
                center,
                radius,
                knots,
            } => {
                check_ball(center, *radius)?;
                for k in knots {
                    check_ball(&k.center, k.radius)?;
                }
                increasing(knots.iter().map(|k| k.p).collect())
            }
            ConstraintFamily::Polytope { polytope } => check_dim(n, polytope.dim()),
        }
    }

    pub fn at(&self, p: f64) -> Result<ConstraintSet> {
        Ok(match self {
            ConstraintFamily::AllSpace => ConstraintSet::All,
            ConstraintFamily::Box {
                lower,
                upper,
                knots,
            } => {
                if knots.is_empty() {
                    ConstraintSet::Box {
                        lower: Vector::from_column_slice(lower),
                        upper: Vector::from_column_slice(upper),
                    }
                } else {
                    let (i, t) = knot_segment(knots, p, |k| k.p)?;
                    let j = (i + 1).min(knots.len() - 1);
                    ConstraintSet::Box {
                        lower: lerp(&knots[i].lower, &knots[j].lower, t),
                        upper: lerp(&knots[i].upper, &knots[j].upper, t),
                    }
                }
            }
            ConstraintFamily::Ball {
                center,
                radius,
                knots,
            } => {
                if knots.is_empty() {
                    ConstraintSet::Ball {
                        center: Vector::from_column_slice(center),
                        radius: *radius,
                    }
                } else {
                    let (i, t) = knot_segment(knots, p, |k| k.p)?;
                    let j = (i + 1).min(knots.len() - 1);
                    ConstraintSet::Ball {
                        center: lerp(&knots[i].center, &knots[j].center, t),
                        radius: knots[i].radius * (1.0 - t) + knots[j].radius * t,
                    }
                }
            }
            ConstraintFamily::Polytope { polytope } => ConstraintSet::Polytope(polytope.clone()),
        })
    }
}

/// The value `R(p)` at a fixed parameter, with exact Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet {
    All,
    Box { lower: Vector, upper: Vector },
    Ball { center: Vector, radius: f64 },
    Polytope(VPolytope),
}

impl ConstraintSet {
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        Ok(match self {
            ConstraintSet::All => x.clone(),
            ConstraintSet::Box { lower, upper } => {
                check_dim(lower.len(), x.len())?;
                Vector::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i]))
            }
            ConstraintSet::Ball { center, radius } => {
                check_dim(center.len(), x.len())?;
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (*radius / n)
                }
            }
            ConstraintSet::Polytope(poly) => {
                project_dist(x, &SumSet::polytope(poly.clone()))?.point
            }
        })
    }

    pub fn dist(&self, x: &Vector) -> Result<f64> {
        Ok(match self {
            ConstraintSet::All => 0.0,
            _ => (x - self.project(x)?).norm(),
        })
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, ConstraintSet::All)
    }

    /// Vertices of a polytopal value (box corners or polytope vertices).
    pub fn vertices(&self) -> Option<Vec<Vector>> {
        match self {
            ConstraintSet::Box { lower, upper } => {
                let n = lower.len();
                Some(
                    (0..(1usize << n))
                        .map(|mask| {
                            Vector::from_fn(n, |i, _| {
                                if mask & (1 << i) != 0 {
                                    upper[i]
                                } else {
                                    lower[i]
                                }
                            })
                        })
                        .collect(),
                )
            }
            ConstraintSet::Polytope(p) => Some(p.vertices().to_vec()),
            _ => None,
        }
    }

    pub fn bounding_box(&self) -> Option<(Vector, Vector)> {
        match self {
            ConstraintSet::All => None,
            ConstraintSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            ConstraintSet::Ball { center, radius } => Some((
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
            ConstraintSet::Polytope(p) => {
                let n = p.dim();
                let mut lo = Vector::from_element(n, f64::INFINITY);
                let mut hi = Vector::from_element(n, f64::NEG_INFINITY);
                for v in p.vertices() {
                    for i in 0..n {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
        }
    }

    /// Deterministic sample of the set: the tensor grid with `density` points
    /// per axis over the bounding box, kept where it lies in the set, plus the
    /// vertices of polytopal values.
    pub fn grid(&self, density: usize) -> Result<Vec<Vector>> {
        let (lo, hi) = self
            .bounding_box()
            .ok_or_else(|| Error::UnsupportedCombination("cannot grid an unbounded set".into()))?;
        let n = lo.len();
        let density = density.max(2);
        let total = density.checked_pow(n as u32).ok_or_else(|| {
            Error::UnsupportedCombination("grid too large for this dimension".into())
        })?;
        let mut out = self.vertices().unwrap_or_default();
        for flat in 0..total {
            let mut rem = flat;
            let x = Vector::from_fn(n, |i, _| {
                let k = rem % density;
                rem /= density;
                lo[i] + (hi[i] - lo[i]) * k as f64 / (density - 1) as f64
            });
            if self.dist(&x)? <= 1e-12 {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Low-discrepancy sample of points in the set (projected Halton points
    /// of the bounding box), or of the given box when the set is unbounded.
    pub fn sample(&self, count: usize, fallback: (&Vector, &Vector), start: u64) -> Result<Vec<Vector>> {
        let (lo, hi) = self
            .bounding_box()
            .unwrap_or_else(|| (fallback.0.clone(), fallback.1.clone()));
        halton_box(&lo, &hi, count, start)
            .into_iter()
            .map(|x| self.project(&x))
            .collect()
    }
}

/// Full problem datum of a parametric set-valued inclusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SviProblemRepr")]
pub struct SviProblem {
    pub matrix: ParamMatrixFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<ConcaveTerm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fan: Option<FanSpec>,
    pub cone: PolyCone,
    #[serde(default)]
    pub constraint: ConstraintFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_alpha: Option<f64>,
}

#[derive(Deserialize)]
struct SviProblemRepr {
    matrix: ParamMatrixFamily,
    #[serde(default)]
    h: Option<ConcaveTerm>,
    #[serde(default)]
    fan: Option<FanSpec>,
    cone: PolyCone,
    #[serde(default)]
    constraint: ConstraintFamily,
    #[serde(default)]
    declared_alpha: Option<f64>,
}

impl TryFrom<SviProblemRepr> for SviProblem {
    type Error = Error;
    fn try_from(r: SviProblemRepr) -> Result<Self> {
        SviProblem {
            matrix: r.matrix,
            h: r.h,
            fan: r.fan,
            cone: r.cone,
            constraint: r.constraint,
            declared_alpha: r.declared_alpha,
        }
        .validated()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBudget {
    pub ell_h: f64,
    pub ell_fan: f64,
    pub ell_total: f64,
}

impl SviProblem {
    /// Checks dimensional consistency and the catalog invariants.
    pub fn validated(self) -> Result<Self> {
        self.matrix.validate()?;
        let (m, n) = self.matrix.shape();
        check_dim(m, self.cone.dim())?;
        if let Some(h) = &self.h {
            h.validate(n, m)?;
        }
        if let Some(fan) = &self.fan {
            fan.validate()?;
            let (fm, fnn) = fan.shape();
            check_dim(m, fm)?;
            check_dim(n, fnn)?;
        }
        self.constraint.validate(n)?;
        if let Some(a) = self.declared_alpha {
            if !(a > 1.0) {
                return Err(Error::InvalidData(format!(
                    "declared alpha must exceed 1, got {a}"
                )));
            }
        }
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.shape().1
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.shape().0
    }

    pub fn cone_set(&self) -> SumSet {
        SumSet::cone(self.cone.clone())
    }

    pub fn at(&self, p: f64) -> Result<ProblemAt<'_>> {
        Ok(ProblemAt {
            problem: self,
            matrix: self.matrix.at(p)?,
            angle: self.matrix.rotation_angle(p),
        })
    }

    pub fn evaluate(&self, p: f64, x: &Vector) -> Result<VPolytope> {
        self.at(p)?.eval(x)
    }

    pub fn merit(&self, p: f64, x: &Vector) -> Result<f64> {
        excess(&self.evaluate(p, x)?, &self.cone_set())
    }

    /// `merit + kappa * dist(x, R(p))`.
    pub fn constrained_merit(&self, p: f64, x: &Vector, kappa: f64) -> Result<f64> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidData(format!("kappa must be >= 0, got {kappa}")));
        }
        let merit = self.merit(p, x)?;
        let dist = self.constraint.at(p)?.dist(x)?;
        Ok(merit + kappa * dist)
    }

    pub fn lipschitz_budget(&self) -> LipschitzBudget {
        let ell_h = self.h.as_ref().map_or(0.0, |h| h.declared_lipschitz);
        let ell_fan = self.fan.as_ref().map_or(0.0, FanSpec::lipschitz_constant);
        LipschitzBudget {
            ell_h,
            ell_fan,
            ell_total: ell_h + ell_fan,
        }
    }

    /// Lipschitz constant of `F(p, .)`: `||M(p)|| + ell_total`.
    pub fn map_lipschitz(&self, p: f64) -> Result<f64> {
        Ok(operator_norm(&self.matrix.at(p)?) + self.lipschitz_budget().ell_total)
    }
}

impl MapFamily for SviProblem {
    fn input_dim(&self) -> usize {
        SviProblem::input_dim(self)
    }
    fn map_at<'a>(&'a self, p: f64) -> Result<Box<dyn SetMap + 'a>> {
        Ok(Box::new(self.at(p)?))
    }
    fn cone(&self) -> &PolyCone {
        &self.cone
    }
    fn constraint_at(&self, p: f64) -> Result<ConstraintSet> {
        self.constraint.at(p)
    }
}

/// `F(p, .)` at a fixed parameter.
pub struct ProblemAt<'a> {
    problem: &'a SviProblem,
    matrix: Matrix,
    angle: Option<f64>,
}

impl ProblemAt<'_> {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl SetMap for ProblemAt<'_> {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn eval(&self, x: &Vector) -> Result<VPolytope> {
        check_dim(self.matrix.ncols(), x.len())?;
        let mut center = &self.matrix * x;
        if let Some(h) = &self.problem.h {
            center += h.eval(x);
        }
        match &self.problem.fan {
            None => VPolytope::singleton(center),
            Some(fan) => VPolytope::new(
                fan.extreme_matrices
                    .iter()
                    .map(|l| &center + &l.0 * x)
                    .collect(),
            ),
        }
    }

    fn witness_hints(&self, _x: &Vector) -> Vec<Vector> {
        // lambda O_theta maps O_{pi/4 - theta} e_1 onto the orthant diagonal.
        match self.angle {
            Some(theta) => vec![&rotation(FRAC_PI_4 - theta) * Vector::from_column_slice(&[1.0, 0.0])],
            None => Vec::new(),
        }
    }
}
