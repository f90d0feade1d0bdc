mod common;

use common::*;
use proptest::prelude::*;
use svi::catalog;
use svi::geometry::vector;
use svi::setmaps::{SetMap, SviProblem};
use svi::Vector;

fn problems() -> Vec<SviProblem> {
    vec![catalog::example_3_8(), catalog::rotation(3.0, false), catalog::rotation(1.0, true)]
}

fn point(a: f64, b: f64) -> Vector {
    vector(&[a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn merit_is_lipschitz(p in 0.0..std::f64::consts::TAU,
                          a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64) {
        let (x1, x2) = (point(a, b), point(c, d));
        for prob in problems() {
            let bound = prob.map_lipschitz(p).unwrap() * (&x1 - &x2).norm() + 1e-9;
            let gap = (prob.merit(p, &x1).unwrap() - prob.merit(p, &x2).unwrap()).abs();
            prop_assert!(gap <= bound, "{} > {}", gap, bound);
        }
    }

    #[test]
    fn merit_is_convex(p in 0.0..std::f64::consts::TAU, t in 0.0..1.0f64,
                       a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64) {
        let (x1, x2) = (point(a, b), point(c, d));
        let mid = &x1 * t + &x2 * (1.0 - t);
        for prob in problems() {
            let lhs = prob.merit(p, &mid).unwrap();
            let rhs = t * prob.merit(p, &x1).unwrap() + (1.0 - t) * prob.merit(p, &x2).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn zero_merit_iff_every_vertex_in_cone(p in 0.0..std::f64::consts::TAU, r in 0.0..1.5f64, s in 0.0..1.0f64) {
        let prob = catalog::example_3_8();
        let oracle = ConeDistance::new(prob.cone.generators());
        // Points on rays through the closed-form solution hit both outcomes.
        let x = &svi::setmaps::rotation(std::f64::consts::FRAC_PI_4 - p) * vector(&[r, 0.0]) * (0.5 + s);
        let inside = prob.at(p).unwrap().eval(&x).unwrap().vertices().iter().all(|v| oracle.dist(v) <= 1e-9);
        prop_assert_eq!(prob.merit(p, &x).unwrap() <= 1e-9, inside);
    }
}

#[test]
fn problems_round_trip_through_json() {
    for prob in problems().into_iter().chain([catalog::example_3_8_boxed()]) {
        let text = serde_json::to_string(&prob).unwrap();
        let back: SviProblem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, prob);
    }
}

#[test]
fn understated_lipschitz_is_rejected() {
    let mut prob = catalog::example_3_8();
    prob.h.as_mut().unwrap().declared_lipschitz = 0.01;
    assert!(prob.validated().is_err());
}

#[test]
fn closed_form_solution_of_the_example() {
    let prob = catalog::example_3_8();
    for p in svi::sampling::linspace(0.0, std::f64::consts::TAU, 17) {
        let x = &svi::setmaps::rotation(std::f64::consts::FRAC_PI_4 - p) * vector(&[1.0, 0.0]);
        assert!(prob.merit(p, &x).unwrap() <= 1e-12);
    }
}
