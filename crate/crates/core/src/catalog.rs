//! Ready-made problem instances used by the tests, the acceptance suite and
//! the command-line example generator.

use std::f64::consts::TAU;

use crate::geometry::{vector, Matrix, PolyCone, VPolytope};
use crate::setmaps::{
    AbsKink, ConcaveComponent, ConcaveTerm, ConstraintFamily, DenseMatrix, FanSpec,
    ParamMatrixFamily, SviProblem,
};
use crate::vopt::{Objective, VectorPath, VopSpec};

/// `lambda * O_p` (or its transpose) over the nonnegative orthant.
pub fn rotation(lambda: f64, clockwise: bool) -> SviProblem {
    SviProblem {
        matrix: ParamMatrixFamily::RotationScaled { lambda, clockwise },
        h: None,
        fan: None,
        cone: PolyCone::nonnegative_orthant(2),
        constraint: ConstraintFamily::AllSpace,
        declared_alpha: None,
    }
}

/// `x -> {x}` over the nonnegative orthant of dimension `n`.
pub fn identity(n: usize) -> SviProblem {
    SviProblem {
        matrix: ParamMatrixFamily::Constant {
            matrix: DenseMatrix(Matrix::identity(n, n)),
        },
        h: None,
        fan: None,
        cone: PolyCone::nonnegative_orthant(n),
        constraint: ConstraintFamily::AllSpace,
        declared_alpha: None,
    }
}

/// `h(x) = (-1 - |x_1|/4, -1 - |x_2|/4)`.
pub fn shifted_abs_term() -> ConcaveTerm {
    ConcaveTerm {
        components: (0..2)
            .map(|i| ConcaveComponent {
                constant: -1.0,
                linear: Vec::new(),
                kinks: vec![AbsKink {
                    index: i,
                    weight: -0.25,
                    center: 0.0,
                }],
            })
            .collect(),
        declared_lipschitz: 0.25,
    }
}

/// Fan of `{lambda I : |lambda| <= 1/4}`.
pub fn quarter_fan() -> FanSpec {
    FanSpec {
        extreme_matrices: vec![
            DenseMatrix(Matrix::identity(2, 2) * 0.25),
            DenseMatrix(Matrix::identity(2, 2) * -0.25),
        ],
    }
}

/// `F(p, x) = 3 O_p x + h(x) + H_L(x)` over the orthant; solved by
/// `O_{pi/4 - p}(1, 0)` for every `p`.
pub fn example_3_8() -> SviProblem {
    SviProblem {
        h: Some(shifted_abs_term()),
        fan: Some(quarter_fan()),
        // (1 - 1/2)(3/sqrt 2 + 1), rounded down.
        declared_alpha: Some(1.56),
        ..rotation(3.0, false)
    }
}

/// The same instance restricted to the box `[-2, 2]^2`.
pub fn example_3_8_boxed() -> SviProblem {
    SviProblem {
        constraint: ConstraintFamily::Box {
            lower: vec![-2.0, -2.0],
            upper: vec![2.0, 2.0],
            knots: Vec::new(),
        },
        ..example_3_8()
    }
}

/// The triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.
pub fn unit_triangle() -> VPolytope {
    VPolytope::new(vec![vector(&[0.0, 0.0]), vector(&[1.0, 0.0]), vector(&[0.0, 1.0])])
        .expect("three finite vertices")
}

/// Rotation objective over the unit triangle; ideal points exist only on
/// part of the parameter circle.
pub fn triangle_vop(clockwise: bool) -> VopSpec {
    VopSpec {
        objective: Objective::LinearRotation {
            lambda: 1.0,
            clockwise,
        },
        constraint: ConstraintFamily::Polytope {
            polytope: unit_triangle(),
        },
        cone: PolyCone::nonnegative_orthant(2),
        objective_lipschitz: 1.0,
        image_density: 33,
    }
}

/// Knots of `sin` on `[0, 2 pi]`; 257 knots contain every point of the
/// 65-, 129- and 257-point grids over that interval.
pub fn sine_path(knots: usize) -> VectorPath {
    VectorPath::sampled(0.0, TAU, knots, |p| vec![p.sin()])
}

/// `f(p, x) = (|x - sin p|, |x - sin p|)` over the real line.
pub fn sine_deviation_vop() -> VopSpec {
    VopSpec {
        objective: Objective::AbsDeviation {
            center: sine_path(257),
        },
        constraint: ConstraintFamily::AllSpace,
        cone: PolyCone::nonnegative_orthant(2),
        objective_lipschitz: 2f64.sqrt(),
        image_density: 33,
    }
}
