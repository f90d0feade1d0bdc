//! Polyhedral cones, vertex polytopes and their Minkowski sums.
//!
//! Everything here is built on one kernel: the Euclidean nearest point of
//! `conv(V) + cone(G)` to a query point, found by an active-set
//! nonnegative least-squares loop with the convex-combination constraint on
//! the `V` weights eliminated exactly. Distances, excess, Hausdorff distance,
//! pointedness and the enlargement-inclusion test all reduce to it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sampling;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Membership tolerance: a point is in a set when its distance is at most this.
pub const GEOM_TOL: f64 = 1e-9;

/// Largest output dimension for which the exact facet enumeration is used.
pub const MAX_EXACT_DIM: usize = 4;

pub fn vector(coords: &[f64]) -> Vector {
    Vector::from_column_slice(coords)
}

fn all_finite(v: &Vector) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Finitely generated closed convex cone `{ G mu : mu >= 0 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeRepr", into = "ConeRepr")]
pub struct PolyCone {
    generators: Vec<Vector>,
    pointed: bool,
}

#[derive(Serialize, Deserialize)]
struct ConeRepr {
    generators: Vec<Vec<f64>>,
}

impl TryFrom<ConeRepr> for PolyCone {
    type Error = Error;
    fn try_from(r: ConeRepr) -> Result<Self> {
        PolyCone::new(r.generators.iter().map(|g| vector(g)).collect())
    }
}

impl From<PolyCone> for ConeRepr {
    fn from(c: PolyCone) -> Self {
        ConeRepr {
            generators: c.generators.iter().map(|g| g.as_slice().to_vec()).collect(),
        }
    }
}

impl PolyCone {
    /// Builds the cone, dropping zero generators. Rejects `{0}` and the whole space.
    pub fn new(generators: Vec<Vector>) -> Result<Self> {
        let dim = generators
            .first()
            .map(|g| g.len())
            .ok_or_else(|| Error::InvalidData("cone needs at least one generator".into()))?;
        if dim == 0 {
            return Err(Error::InvalidData("cone generators must be nonempty".into()));
        }
        for g in &generators {
            check_dim(dim, g.len())?;
            if !all_finite(g) {
                return Err(Error::InvalidData("non-finite cone generator".into()));
            }
        }
        let generators: Vec<Vector> = generators.into_iter().filter(|g| g.norm() > 0.0).collect();
        if generators.is_empty() {
            return Err(Error::InvalidData("cone must not be {0}".into()));
        }

        // C = R^m iff it contains every +-e_i.
        let origin = [Vector::zeros(dim)];
        let mut whole_space = true;
        'outer: for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut e = Vector::zeros(dim);
                e[i] = sign;
                if nearest_point(&e, &origin, &generators)?.distance > GEOM_TOL {
                    whole_space = false;
                    break 'outer;
                }
            }
        }
        if whole_space {
            return Err(Error::InvalidData("cone must not be the whole space".into()));
        }

        // Pointed iff the origin is outside the hull of the normalized generators.
        let unit: Vec<Vector> = generators.iter().map(|g| g / g.norm()).collect();
        let pointed = nearest_point(&Vector::zeros(dim), &unit, &[])?.distance > 1e-7;

        Ok(PolyCone {
            generators,
            pointed,
        })
    }

    pub fn nonnegative_orthant(dim: usize) -> Self {
        let generators = (0..dim)
            .map(|i| {
                let mut e = Vector::zeros(dim);
                e[i] = 1.0;
                e
            })
            .collect();
        PolyCone {
            generators,
            pointed: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.generators[0].len()
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    pub fn is_pointed(&self) -> bool {
        self.pointed
    }

    pub fn contains(&self, y: &Vector) -> Result<bool> {
        Ok(project_dist(y, &SumSet::cone(self.clone()))?.distance <= GEOM_TOL)
    }
}

/// Compact convex set given by a (possibly redundant) vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct VPolytope {
    vertices: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeRepr {
    vertices: Vec<Vec<f64>>,
}

impl TryFrom<PolytopeRepr> for VPolytope {
    type Error = Error;
    fn try_from(r: PolytopeRepr) -> Result<Self> {
        VPolytope::new(r.vertices.iter().map(|v| vector(v)).collect())
    }
}

impl From<VPolytope> for PolytopeRepr {
    fn from(p: VPolytope) -> Self {
        PolytopeRepr {
            vertices: p.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
    }
}

impl VPolytope {
    pub fn new(vertices: Vec<Vector>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidData("polytope needs at least one vertex".into()))?;
        for v in &vertices {
            check_dim(dim, v.len())?;
            if !all_finite(v) {
                return Err(Error::InvalidData("non-finite polytope vertex".into()));
            }
        }
        Ok(VPolytope { vertices })
    }

    pub fn singleton(v: Vector) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Vector> {
        self.vertices
    }

    pub fn translated(&self, t: &Vector) -> Self {
        VPolytope {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        VPolytope {
            vertices: self.vertices.iter().map(|v| -v).collect(),
        }
    }
}

/// Minkowski sum `base + cone`; a plain polytope when the cone is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SumSet {
    pub base: VPolytope,
    pub cone: Option<PolyCone>,
}

impl SumSet {
    pub fn new(base: VPolytope, cone: Option<PolyCone>) -> Result<Self> {
        if let Some(c) = &cone {
            check_dim(base.dim(), c.dim())?;
        }
        Ok(SumSet { base, cone })
    }

    pub fn polytope(base: VPolytope) -> Self {
        SumSet { base, cone: None }
    }

    pub fn cone(cone: PolyCone) -> Self {
        let base = VPolytope {
            vertices: vec![Vector::zeros(cone.dim())],
        };
        SumSet {
            base,
            cone: Some(cone),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    fn generators(&self) -> &[Vector] {
        self.cone.as_ref().map_or(&[], |c| c.generators())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vector,
    pub distance: f64,
}

/// Euclidean nearest point of `set` to `y`.
pub fn project_dist(y: &Vector, set: &SumSet) -> Result<Projection> {
    check_dim(set.dim(), y.len())?;
    let np = nearest_point(y, set.base.vertices(), set.generators())?;
    Ok(Projection {
        point: np.point,
        distance: np.distance,
    })
}

/// `dist(y, S)` with the convention `dist(y, {}) = +inf` for an absent set.
pub fn dist_or_infinite(y: &Vector, set: Option<&SumSet>) -> Result<f64> {
    match set {
        Some(s) => Ok(project_dist(y, s)?.distance),
        None => Ok(f64::INFINITY),
    }
}

/// Metric excess of a polytope beyond `set`. The distance to a convex set is
/// convex, so the supremum over the hull is attained at a vertex.
pub fn excess(a: &VPolytope, set: &SumSet) -> Result<f64> {
    check_dim(set.dim(), a.dim())?;
    let mut worst: f64 = 0.0;
    for v in a.vertices() {
        worst = worst.max(nearest_point(v, set.base.vertices(), set.generators())?.distance);
    }
    Ok(worst)
}

pub fn hausdorff(a: &VPolytope, b: &VPolytope) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let ab = excess(a, &SumSet::polytope(b.clone()))?;
    let ba = excess(b, &SumSet::polytope(a.clone()))?;
    Ok(ab.max(ba))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inclusion {
    Holds,
    FailsWithWitness(Vector),
    Inconclusive,
}

impl Inclusion {
    pub fn holds(&self) -> bool {
        matches!(self, Inclusion::Holds)
    }
}

/// Decides whether `B(A, s)` is contained in `B(D, r)`.
///
/// The supremum of `dist(., D)` over `conv(A) + sB` equals
/// `max_v (s + sd(v, D))` over the vertices `v` of `A`, where `sd` is the
/// signed distance (negative depth inside `D`). For `dim <= 4` this is
/// evaluated exactly through an enumerated facet description of `D`; above
/// that, `dirs` directions per vertex are sampled.
pub fn enlargement_inclusion(
    a: &VPolytope,
    s: f64,
    d: &SumSet,
    r: f64,
    dirs: usize,
) -> Result<Inclusion> {
    check_dim(d.dim(), a.dim())?;
    if !(s >= 0.0 && r >= 0.0) {
        return Err(Error::InvalidData(format!(
            "enlargement radii must be nonnegative (s = {s}, r = {r})"
        )));
    }

    let mut projections = Vec::with_capacity(a.vertices().len());
    for v in a.vertices() {
        projections.push(nearest_point(v, d.base.vertices(), d.generators())?);
    }
    if projections.iter().all(|p| p.distance + s <= r + GEOM_TOL) {
        return Ok(Inclusion::Holds);
    }

    if d.dim() <= MAX_EXACT_DIM {
        let hs = Halfspaces::of(d)?;
        let mut worst = f64::NEG_INFINITY;
        let mut witness = None;
        for (v, proj) in a.vertices().iter().zip(&projections) {
            let (sd, normal) = hs.signed_distance_with(v, proj);
            if s + sd > worst {
                worst = s + sd;
                witness = Some(v + normal * s);
            }
        }
        return Ok(if worst <= r + GEOM_TOL {
            Inclusion::Holds
        } else {
            Inclusion::FailsWithWitness(witness.expect("polytope has a vertex"))
        });
    }

    // Sampled fallback for high dimension.
    let directions = sampling::unit_directions(d.dim(), dirs.max(2 * d.dim()), 0.0);
    let mut sampled_max: f64 = 0.0;
    for (v, proj) in a.vertices().iter().zip(&projections) {
        let mut candidates: Vec<Vector> = directions.clone();
        if proj.distance > GEOM_TOL {
            candidates.push((v - &proj.point) / proj.distance);
        }
        for e in candidates {
            let y = v + e * s;
            let dist = project_dist(&y, d)?.distance;
            if dist > r + GEOM_TOL {
                return Ok(Inclusion::FailsWithWitness(y));
            }
            sampled_max = sampled_max.max(dist);
        }
    }
    let margin = s * (1.0 - (std::f64::consts::PI / dirs.max(1) as f64).cos());
    Ok(if sampled_max + margin <= r {
        Inclusion::Holds
    } else {
        Inclusion::Inconclusive
    })
}

/// Default number of sampled directions for the enlargement test in dimension `m`.
pub fn default_direction_count(m: usize) -> usize {
    match m {
        0..=1 => 2,
        2 => 64,
        3 => 512,
        _ => 2048,
    }
}

/// Supporting-halfspace description `<n, y> <= b` of a full-dimensional
/// `conv(V) + cone(G)` that includes every facet, enumerated from normals of
/// `(m-1)`-subsets of edge and generator directions.
#[derive(Debug, Clone)]
pub struct Halfspaces {
    set: SumSet,
    normals: Vec<Vector>,
    offsets: Vec<f64>,
    full_dimensional: bool,
    flat_normal: Option<Vector>,
}

impl Halfspaces {
    pub fn of(set: &SumSet) -> Result<Self> {
        let m = set.dim();
        if m > MAX_EXACT_DIM {
            return Err(Error::UnsupportedCombination(format!(
                "facet enumeration is limited to dimension {MAX_EXACT_DIM}, got {m}"
            )));
        }
        let mut verts: Vec<Vector> = Vec::new();
        for v in set.base.vertices() {
            if !verts.iter().any(|w| (w - v).norm() <= 1e-12) {
                verts.push(v.clone());
            }
        }
        let gens: Vec<Vector> = set.generators().iter().map(|g| g / g.norm()).collect();

        let mut dirs: Vec<Vector> = Vec::new();
        let mut push_dir = |d: Vector| {
            let n = d.norm();
            if n <= 1e-12 {
                return;
            }
            let d = d / n;
            if !dirs.iter().any(|e| d.dot(e).abs() > 1.0 - 1e-12) {
                dirs.push(d);
            }
        };
        for i in 0..verts.len() {
            for j in (i + 1)..verts.len() {
                push_dir(&verts[j] - &verts[i]);
            }
        }
        for g in &gens {
            push_dir(g.clone());
        }

        let rank = if dirs.is_empty() {
            0
        } else {
            let mat = Matrix::from_columns(&dirs);
            mat.rank(1e-10)
        };
        let full_dimensional = rank == m;
        let flat_normal = if full_dimensional {
            None
        } else if dirs.is_empty() {
            let mut e = Vector::zeros(m);
            e[0] = 1.0;
            Some(e)
        } else {
            Some(null_vector(&dirs, m))
        };

        let mut normals: Vec<Vector> = Vec::new();
        let mut offsets = Vec::new();
        if full_dimensional {
            let mut consider = |n: Vector| {
                let norm = n.norm();
                if norm <= 1e-12 {
                    return;
                }
                for sign in [1.0, -1.0] {
                    let n = &n * (sign / norm);
                    if gens.iter().any(|g| n.dot(g) > 1e-10) {
                        continue;
                    }
                    if normals.iter().any(|e| (e - &n).norm() <= 1e-10) {
                        continue;
                    }
                    let b = verts
                        .iter()
                        .map(|v| n.dot(v))
                        .fold(f64::NEG_INFINITY, f64::max);
                    normals.push(n);
                    offsets.push(b);
                }
            };
            for_each_subset(dirs.len(), m - 1, |idx| {
                let rows: Vec<&Vector> = idx.iter().map(|&i| &dirs[i]).collect();
                consider(generalized_cross(&rows, m));
            });
        }

        Ok(Halfspaces {
            set: set.clone(),
            normals,
            offsets,
            full_dimensional,
            flat_normal,
        })
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Signed distance to the set (negative depth inside) and the direction in
    /// which moving away from `y` increases it fastest.
    pub fn signed_distance(&self, y: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.set.dim(), y.len())?;
        if self.full_dimensional {
            let (value, idx) = self.max_violation(y);
            if value < -GEOM_TOL {
                return Ok((value, self.normals[idx].clone()));
            }
        }
        let np = nearest_point(y, self.set.base.vertices(), self.set.generators())?;
        Ok(self.signed_distance_with(y, &np))
    }

    fn max_violation(&self, y: &Vector) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, (n, b)) in self.normals.iter().zip(&self.offsets).enumerate() {
            let v = n.dot(y) - b;
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    fn signed_distance_with(&self, y: &Vector, np: &impl AsNearest) -> (f64, Vector) {
        let (point, distance) = np.parts();
        if distance > GEOM_TOL {
            return (distance, (y - point) / distance);
        }
        if self.full_dimensional && !self.normals.is_empty() {
            let (value, idx) = self.max_violation(y);
            (value.min(distance), self.normals[idx].clone())
        } else {
            let n = self
                .flat_normal
                .clone()
                .unwrap_or_else(|| Vector::zeros(y.len()));
            (distance, n)
        }
    }
}

trait AsNearest {
    fn parts(&self) -> (&Vector, f64);
}

impl AsNearest for NearestPoint {
    fn parts(&self) -> (&Vector, f64) {
        (&self.point, self.distance)
    }
}

impl AsNearest for Projection {
    fn parts(&self) -> (&Vector, f64) {
        (&self.point, self.distance)
    }
}

fn null_vector(rows: &[Vector], m: usize) -> Vector {
    // Pad with zero rows so the SVD returns a full V.
    let mut padded: Vec<nalgebra::RowDVector<f64>> = rows.iter().map(|d| d.transpose()).collect();
    while padded.len() < m {
        padded.push(nalgebra::RowDVector::zeros(m));
    }
    let mat = Matrix::from_rows(&padded);
    let svd = mat.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut best = 0;
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] < svd.singular_values[best] {
            best = i;
        }
    }
    vt.row(best).transpose()
}

/// Vector orthogonal to the `m - 1` given rows (cofactor expansion).
fn generalized_cross(rows: &[&Vector], m: usize) -> Vector {
    match m {
        1 => vector(&[1.0]),
        2 => vector(&[-rows[0][1], rows[0][0]]),
        3 => {
            let (a, b) = (rows[0], rows[1]);
            vector(&[
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ])
        }
        _ => {
            let mut out = Vector::zeros(m);
            for col in 0..m {
                let minor = Matrix::from_fn(m - 1, m - 1, |i, j| {
                    let jj = if j < col { j } else { j + 1 };
                    rows[i][jj]
                });
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                out[col] = sign * minor.determinant();
            }
            out
        }
    }
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NearestPoint {
    pub point: Vector,
    pub distance: f64,
}

/// Nearest point of `conv(base) + cone(gens)` to `y`.
///
/// Primal active-set method on the weights `z >= 0` with `sum(z_base) = 1`.
/// Each equality-constrained subproblem eliminates one passive base weight
/// and is solved as an ordinary least-squares problem via SVD.
pub(crate) fn nearest_point(y: &Vector, base: &[Vector], gens: &[Vector]) -> Result<NearestPoint> {
    let k = base.len();
    debug_assert!(k > 0);
    if k == 1 && gens.is_empty() {
        return Ok(NearestPoint {
            distance: (y - &base[0]).norm(),
            point: base[0].clone(),
        });
    }
    let nvar = k + gens.len();
    let col = |i: usize| -> &Vector {
        if i < k {
            &base[i]
        } else {
            &gens[i - k]
        }
    };
    let scale = 1.0
        + (0..nvar)
            .map(|i| col(i).norm())
            .fold(y.norm(), f64::max);
    let cost_tol = 1e-13 * scale * scale;
    let zero_tol = 1e-14;

    let i0 = (0..k)
        .min_by(|&a, &b| {
            (y - &base[a])
                .norm_squared()
                .total_cmp(&(y - &base[b]).norm_squared())
        })
        .expect("nonempty base");
    let mut z = vec![0.0; nvar];
    z[i0] = 1.0;
    let mut passive = vec![false; nvar];
    passive[i0] = true;
    let mut blocked = vec![false; nvar];

    let combine = |z: &[f64]| -> Vector {
        let mut p = Vector::zeros(y.len());
        for (i, &zi) in z.iter().enumerate() {
            if zi != 0.0 {
                p.axpy(zi, col(i), 1.0);
            }
        }
        p
    };

    let budget = 20 * nvar + 100;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > budget {
            return Err(Error::NonConvergence { iterations });
        }
        let resid = y - combine(&z);
        let w: Vec<f64> = (0..nvar).map(|i| col(i).dot(&resid)).collect();
        let (sum, cnt) = (0..k)
            .filter(|&i| passive[i])
            .fold((0.0, 0usize), |(s, c), i| (s + w[i], c + 1));
        let nu = sum / cnt.max(1) as f64;
        let entering = (0..nvar)
            .filter(|&j| !passive[j] && !blocked[j])
            .map(|j| (j, if j < k { nu - w[j] } else { -w[j] }))
            .filter(|&(_, mu)| mu < -cost_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, _)) = entering else {
            break;
        };
        passive[j] = true;

        loop {
            iterations += 1;
            if iterations > budget {
                return Err(Error::NonConvergence { iterations });
            }
            let zeta = solve_subproblem(y, &passive, k, &col);
            if (0..nvar).all(|i| !passive[i] || zeta[i] > zero_tol) {
                z = zeta;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut t: f64 = 1.0;
            for i in 0..nvar {
                if passive[i] && zeta[i] <= zero_tol {
                    let denom = z[i] - zeta[i];
                    let ti = if denom > 0.0 { z[i] / denom } else { 0.0 };
                    t = t.min(ti);
                }
            }
            let t = t.clamp(0.0, 1.0);
            let moved = t > 0.0;
            for i in 0..nvar {
                if passive[i] {
                    z[i] += t * (zeta[i] - z[i]);
                }
            }
            for i in 0..nvar {
                if passive[i] && (z[i] <= zero_tol || (zeta[i] <= zero_tol && t >= 1.0)) {
                    z[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !moved && !passive[j] {
                // The entering variable cannot move off zero; skip it this round.
                blocked[j] = true;
                break;
            }
            if moved {
                blocked.iter_mut().for_each(|b| *b = false);
            }
        }
    }

    let point = combine(&z);
    Ok(NearestPoint {
        distance: (y - &point).norm(),
        point,
    })
}

fn solve_subproblem<'a>(
    y: &Vector,
    passive: &[bool],
    k: usize,
    col: &impl Fn(usize) -> &'a Vector,
) -> Vec<f64> {
    let nvar = passive.len();
    let pivot = (0..k).find(|&i| passive[i]).expect("a base weight stays passive");
    let free: Vec<usize> = (0..nvar).filter(|&i| passive[i] && i != pivot).collect();
    let mut zeta = vec![0.0; nvar];
    if free.is_empty() {
        zeta[pivot] = 1.0;
        return zeta;
    }
    let a0 = col(pivot);
    let columns: Vec<Vector> = free
        .iter()
        .map(|&i| if i < k { col(i) - a0 } else { col(i).clone() })
        .collect();
    let mat = Matrix::from_columns(&columns);
    let rhs = y - a0;
    let svd = mat.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1e-300);
    let eta = svd
        .solve(&rhs, eps)
        .unwrap_or_else(|_| Vector::zeros(free.len()));
    let mut base_sum = 0.0;
    for (slot, &i) in free.iter().enumerate() {
        zeta[i] = eta[slot];
        if i < k {
            base_sum += eta[slot];
        }
    }
    zeta[pivot] = 1.0 - base_sum;
    zeta
}
