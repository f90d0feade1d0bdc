//! Brute-force oracles shared by the integration suites. None of them call
//! into the library's geometry kernels.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svi::{PolyCone, VPolytope, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn gaussian_unit(rng: &mut ChaCha8Rng, m: usize) -> Vector {
    loop {
        let v = Vector::from_fn(m, |_, _| uniform(rng, -1.0, 1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Random pointed cone: 1..=4 generators within 60 degrees of a random axis.
pub fn random_cone(rng: &mut ChaCha8Rng, m: usize) -> PolyCone {
    let axis = gaussian_unit(rng, m);
    let count = 1 + (rng.random::<f64>() * 4.0) as usize;
    let gens = (0..count)
        .map(|_| loop {
            let g = gaussian_unit(rng, m);
            if g.dot(&axis) > 0.5 {
                break g * uniform(rng, 0.5, 2.0);
            }
        })
        .collect();
    PolyCone::new(gens).expect("pointed cone")
}

/// Random polytope with 1..=8 vertices in `[-3, 3]^m`.
pub fn random_polytope(rng: &mut ChaCha8Rng, m: usize) -> VPolytope {
    let count = 1 + (rng.random::<f64>() * 8.0) as usize;
    VPolytope::new(
        (0..count)
            .map(|_| Vector::from_fn(m, |_, _| uniform(rng, -3.0, 3.0)))
            .collect(),
    )
    .expect("finite vertices")
}

/// Exact distance to `cone(gens)`: the projection lies on a face spanned by
/// linearly independent generators, where it is the unconstrained
/// least-squares point; every subset is enumerated and feasible ones kept.
pub struct ConeDistance {
    /// Per independent subset: its generator matrix and pseudo-inverse.
    faces: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl ConeDistance {
    pub fn new(gens: &[Vector]) -> Self {
        let m = gens[0].len();
        let k = gens.len();
        let mut faces = Vec::new();
        for mask in 1u32..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            if idx.len() > m {
                continue;
            }
            let g = DMatrix::from_fn(m, idx.len(), |r, c| gens[idx[c]][r]);
            let gtg = g.transpose() * &g;
            if gtg.determinant().abs() < 1e-12 {
                continue;
            }
            let Some(inv) = gtg.try_inverse() else { continue };
            let pinv = inv * g.transpose();
            faces.push((g, pinv));
        }
        ConeDistance { faces }
    }

    pub fn dist(&self, y: &Vector) -> f64 {
        let y = DVector::from_column_slice(y.as_slice());
        let mut best = y.norm();
        for (g, pinv) in &self.faces {
            let mu = pinv * &y;
            if mu.iter().all(|c| *c >= -1e-12) {
                best = best.min((&y - g * mu).norm());
            }
        }
        best
    }
}

pub fn cone_dist(y: &Vector, gens: &[Vector]) -> f64 {
    ConeDistance::new(gens).dist(y)
}

/// Random convex combinations of the vertices, preceded by the vertices
/// themselves.
pub fn hull_samples(rng: &mut ChaCha8Rng, a: &VPolytope, count: usize) -> Vec<Vector> {
    let verts = a.vertices();
    let mut out: Vec<Vector> = verts.to_vec();
    while out.len() < count {
        let w: Vec<f64> = verts.iter().map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
        let total: f64 = w.iter().sum();
        let mut x = Vector::zeros(a.dim());
        for (v, wi) in verts.iter().zip(&w) {
            x += v * (wi / total);
        }
        out.push(x);
    }
    out
}

/// Ideal set of the unit-triangle rotation example as tabulated in the
/// paper: `(0,0)` at the endpoints, `(1,0)` on `[pi/2, 3pi/4]`, `(0,1)` on
/// `[5pi/4, 3pi/2]`, empty elsewhere.
pub fn triangle_table(p: f64) -> Option<[f64; 2]> {
    let eps = 1e-12;
    if p.abs() <= eps || (p - TAU).abs() <= eps {
        Some([0.0, 0.0])
    } else if p >= FRAC_PI_2 - eps && p <= 0.75 * PI + eps {
        Some([1.0, 0.0])
    } else if p >= 1.25 * PI - eps && p <= 1.5 * PI + eps {
        Some([0.0, 1.0])
    } else {
        None
    }
}

/// Indices within one grid step of a change in the tabulated classification.
pub fn near_table_boundary(grid: &[f64], i: usize) -> bool {
    let class = |j: usize| triangle_table(grid[j]);
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(grid.len() - 1);
    (lo..hi).any(|j| class(j) != class(j + 1))
}

/// Exact increase bound of `lambda O_theta` for the nonnegative orthant.
pub fn rotation_increase(lambda: f64) -> f64 {
    lambda / 2f64.sqrt() + 1.0
}
