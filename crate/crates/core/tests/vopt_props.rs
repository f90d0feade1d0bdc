mod common;

use std::f64::consts::TAU;

use common::*;
use proptest::prelude::*;
use svi::catalog;
use svi::geometry::{project_dist, vector};
use svi::sampling::linspace;
use svi::setmaps::{ConstraintFamily, SetMap};
use svi::vopt::{
    brute_force_ideal, ideal_value_sweep, solve_ideal, Objective, OracleOutcome, VectorPath,
    VopConfig, VopSpec,
};
use svi::{PolyCone, SumSet, VPolytope};

fn boxed_deviation(center: f64) -> VopSpec {
    VopSpec {
        objective: Objective::AbsDeviation {
            center: VectorPath::constant(vec![center]),
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
    .unwrap()
}

#[test]
fn solver_matches_oracle_on_the_triangle() {
    let spec = catalog::triangle_vop(true);
    let cfg = VopConfig {
        alpha_lower: Some(1.0 / 2f64.sqrt() + 1.0),
        ..VopConfig::default()
    };
    let grid = linspace(0.0, TAU, 129);
    let x0 = vector(&[1.0 / 3.0, 1.0 / 3.0]);
    for (i, &p) in grid.iter().enumerate() {
        if near_table_boundary(&grid, i) {
            continue;
        }
        let found = solve_ideal(&spec, p, &x0, &cfg).unwrap().found().is_some();
        let ideal = matches!(brute_force_ideal(&spec, p, 9).unwrap().outcome, OracleOutcome::Ideal { .. });
        assert_eq!(found, ideal, "p = {p}");
    }
}

#[test]
fn oracle_finds_the_deviation_center() {
    let report = brute_force_ideal(&boxed_deviation(0.3), 0.0, 201).unwrap();
    assert!(!report.grid_too_coarse);
    match report.outcome {
        OracleOutcome::Ideal { x, .. } => assert!((x[0] - 0.3).abs() < 1e-12),
        OracleOutcome::Empty => panic!("the center is ideal"),
    }
}

#[test]
fn deviation_rows_meet_the_error_bound() {
    let spec = catalog::sine_deviation_vop();
    let cfg = VopConfig {
        alpha_lower: Some(2.0),
        ..VopConfig::default()
    };
    let x0 = vector(&[1.5]);
    for p in linspace(0.0, TAU, 17) {
        let res = solve_ideal(&spec, p, &x0, &cfg).unwrap();
        let (x, _) = res.found().expect("solved");
        let solve = res.solve.as_ref().unwrap();
        // No constraint: the bound reduces to exc / (alpha_lower - alpha).
        let exc = 2f64.sqrt() * (x0[0] - p.sin()).abs();
        let rhs = exc / (2.0 - solve.alpha_used);
        assert!((solve.bound_rhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        assert!((x - &x0).norm() <= rhs + cfg.solver.tol);
    }
}

#[test]
fn sweep_values_follow_the_table() {
    let spec = catalog::triangle_vop(true);
    let cfg = VopConfig {
        alpha_lower: Some(1.0 / 2f64.sqrt() + 1.0),
        ..VopConfig::default()
    };
    let grid = linspace(1.6, 2.3, 5);
    let table = ideal_value_sweep(&spec, &grid, &vector(&[0.2, 0.2]), &cfg).unwrap();
    for row in &table.rows {
        assert!(row.solved);
        let want = &svi::setmaps::rotation(-row.p) * vector(&[1.0, 0.0]);
        assert!((row.value.as_ref().unwrap() - want).norm() < 1e-6);
    }
}

fn minkowski(a: &VPolytope, ta: f64, b: &VPolytope, tb: f64) -> VPolytope {
    let mut pts = Vec::new();
    for u in a.vertices() {
        for v in b.vertices() {
            pts.push(u * ta + v * tb);
        }
    }
    VPolytope::new(pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ideal_values_coincide(p in 0.0..TAU) {
        let spec = catalog::triangle_vop(true);
        if let OracleOutcome::Ideal { all, value, .. } = brute_force_ideal(&spec, p, 9).unwrap().outcome {
            for x in &all {
                prop_assert!((spec.objective_at(p, x).unwrap() - &value).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn evaluator_is_cone_concave(p in 0.0..TAU, t in 0.0..1.0f64,
                                 a in 0.0..0.5f64, b in 0.0..0.5f64, c in 0.0..0.5f64, d in 0.0..0.5f64,
                                 center in -1.0..1.0f64) {
        let cases = [
            (catalog::triangle_vop(true), vector(&[a, b]), vector(&[c, d])),
            (boxed_deviation(center), vector(&[2.0 * a - 0.5]), vector(&[2.0 * c - 0.5])),
        ];
        for (spec, x1, x2) in cases {
            let phi = spec.build_vop_problem(p, spec.image_density).unwrap();
            let mid = &x1 * t + &x2 * (1.0 - t);
            let hull = minkowski(&phi.eval(&x1).unwrap(), t, &phi.eval(&x2).unwrap(), 1.0 - t);
            let target = SumSet::new(hull, Some(spec.cone.clone())).unwrap();
            for v in phi.eval(&mid).unwrap().vertices() {
                prop_assert!(project_dist(v, &target).unwrap().distance <= 1e-9);
            }
        }
    }
}
