//! Deterministic direction and point sequences.

use std::f64::consts::PI;

use crate::geometry::Vector;

/// Radical inverse of `index` in the given base (Halton coordinate).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// `count` points of the Halton sequence in the box `[lower, upper]`,
/// starting at sequence index `start`.
pub fn halton_box(lower: &Vector, upper: &Vector, count: usize, start: u64) -> Vec<Vector> {
    let dim = lower.len();
    (0..count as u64)
        .map(|i| {
            Vector::from_fn(dim, |d, _| {
                let t = halton(start + i + 1, PRIMES[d % PRIMES.len()]);
                lower[d] + t * (upper[d] - lower[d])
            })
        })
        .collect()
}

/// Unit directions in `dim` dimensions.
///
/// `phase` in `[0, 1)` rotates the pattern: uniform angles in the plane,
/// a Fibonacci sphere in three dimensions, normalized Halton points plus
/// coordinate axes above that. In one dimension the answer is `{+1, -1}`.
pub fn unit_directions(dim: usize, count: usize, phase: f64) -> Vec<Vector> {
    match dim {
        0 => Vec::new(),
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * PI * (k as f64 + phase) / count as f64;
                Vector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let spin = 2.0 * PI * phase;
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let a = golden * k as f64 + spin;
                    Vector::from_column_slice(&[rho * a.cos(), rho * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut out = Vec::with_capacity(count + 2 * dim);
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = Vector::zeros(dim);
                    e[i] = s;
                    out.push(e);
                }
            }
            let offset = (phase * 1_000.0) as u64;
            let lo = Vector::from_element(dim, -1.0);
            let hi = Vector::from_element(dim, 1.0);
            for p in halton_box(&lo, &hi, count, offset) {
                let n = p.norm();
                if n > 1e-9 {
                    out.push(p / n);
                }
            }
            out
        }
    }
}

/// FNV-1a hash of a byte string.
pub fn fingerprint(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stable seed derived from a parameter value and a point.
pub fn point_seed(p: f64, x: &Vector) -> u64 {
    let bits = std::iter::once(p).chain(x.iter().copied());
    fingerprint(bits.flat_map(|v| v.to_bits().to_le_bytes()))
}

/// Maps a seed to a phase in `[0, 1)`.
pub fn seed_phase(seed: u64) -> f64 {
    halton(seed % 1_000_003 + 1, 2)
}

/// Evenly spaced grid `start..=stop` with `count` points.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
