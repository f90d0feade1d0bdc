//! Geometry and merit property checks run against a loaded problem.

use std::path::Path;

use anyhow::Result;

use svi::geometry::{excess, hausdorff, project_dist, Vector};
use svi::problem_file::ProblemFile;
use svi::sampling::halton_box;
use svi::setmaps::{merit_of, SetMap};
use svi::{PolyCone, SumSet};

const TOL: f64 = 1e-9;
const POINTS: usize = 24;

#[derive(Default)]
struct Tally {
    names: Vec<&'static str>,
    passed: Vec<usize>,
    failed: Vec<usize>,
}

impl Tally {
    fn record(&mut self, name: &'static str, ok: bool) {
        let i = match self.names.iter().position(|n| *n == name) {
            Some(i) => i,
            None => {
                self.names.push(name);
                self.passed.push(0);
                self.failed.push(0);
                self.names.len() - 1
            }
        };
        if ok {
            self.passed[i] += 1;
        } else {
            self.failed[i] += 1;
        }
    }
}

/// Checks at one parameter value; `lipschitz` bounds the Hausdorff
/// modulus of `map`.
fn check_map(map: &dyn SetMap, cone: &PolyCone, lipschitz: f64, points: &[Vector], tally: &mut Tally) -> Result<()> {
    let rays = cone.generators();
    let cone = &SumSet::cone(cone.clone());
    let images = points.iter().map(|x| map.eval(x)).collect::<svi::Result<Vec<_>>>()?;
    let merits = points.iter().map(|x| merit_of(map, cone, x)).collect::<svi::Result<Vec<_>>>()?;
    for (image, &merit) in images.iter().zip(&merits) {
        tally.record("merit is finite and nonnegative", merit.is_finite() && merit >= 0.0);

        let mut inside = true;
        for v in image.vertices() {
            let proj = project_dist(v, cone)?;
            let again = project_dist(&proj.point, cone)?;
            tally.record(
                "projection is idempotent",
                again.distance <= TOL && (&again.point - &proj.point).norm() <= TOL * (1.0 + v.norm()),
            );
            // The apex and the generators are members of the cone.
            let nearest_member = rays.iter().map(|g| (v - g).norm()).fold(v.norm(), f64::min);
            tally.record("projection is no farther than cone members", proj.distance <= nearest_member + TOL);
            inside &= proj.distance <= TOL;
        }
        tally.record("zero merit iff the image lies in the cone", (merit <= TOL) == inside);
    }
    for i in 0..points.len() {
        let j = (i + 1) % points.len();
        let gap = (&points[i] - &points[j]).norm();
        let slack = TOL * (1.0 + lipschitz * gap);
        let h_ij = hausdorff(&images[i], &images[j])?;
        let h_ji = hausdorff(&images[j], &images[i])?;
        tally.record("hausdorff distance is symmetric", (h_ij - h_ji).abs() <= TOL);
        tally.record("images are lipschitz in hausdorff distance", h_ij <= lipschitz * gap + slack);
        tally.record("merit is lipschitz", (merits[i] - merits[j]).abs() <= lipschitz * gap + slack);
        tally.record(
            "excess obeys the triangle inequality",
            excess(&images[i], cone)? <= merits[j] + h_ij + TOL,
        );
    }
    Ok(())
}

/// Prints one line per property and returns exit code 3 if any failed.
pub fn run(problem: &Path, grid: &[f64], seed: u64) -> Result<u8> {
    let file = crate::commands::load(problem)?;
    let mut tally = Tally::default();
    match &file {
        ProblemFile::Svi(prob) => {
            let n = prob.input_dim();
            let points = halton_box(&Vector::from_element(n, -2.0), &Vector::from_element(n, 2.0), POINTS, seed);
            for &p in grid {
                check_map(&prob.at(p)?, &prob.cone, prob.map_lipschitz(p)?, &points, &mut tally)?;
            }
        }
        ProblemFile::Vop(spec) => {
            let n = spec.input_dim();
            let points = halton_box(&Vector::from_element(n, -2.0), &Vector::from_element(n, 2.0), POINTS, seed);
            for &p in grid {
                let phi = spec.build_vop_problem(p, spec.image_density)?;
                check_map(&phi, &spec.cone, spec.objective_lipschitz, &points, &mut tally)?;
            }
        }
    }
    let mut total_failed = 0;
    for (i, name) in tally.names.iter().enumerate() {
        let (ok, bad) = (tally.passed[i], tally.failed[i]);
        total_failed += bad;
        println!("{:<4} {name}: {ok} passed, {bad} failed", if bad == 0 { "PASS" } else { "FAIL" });
    }
    let total: usize = tally.passed.iter().sum::<usize>() + total_failed;
    println!("{} of {total} checks passed over {} parameter values", total - total_failed, grid.len());
    Ok(if total_failed == 0 { 0 } else { 3 })
}
