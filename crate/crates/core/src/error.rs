//! Error type shared by every module of the crate.

use crate::geometry::Vector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("nonnegative least-squares loop did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("parameter p = {p} outside table range [{lo}, {hi}]")]
    ParameterOutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("no increase constant above 1 admits witnesses at x = {x:?}")]
    PropertyAbsent { x: Vec<f64> },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("point already lies in the constraint set")]
    AlreadyFeasible,

    #[error(
        "no descent step found at x = {x:?} (merit {merit:e}) after trying {radii_tried} radii"
    )]
    NoDescentStep {
        x: Vec<f64>,
        merit: f64,
        radii_tried: usize,
    },

    #[error("iteration budget of {iterations} exhausted (merit {merit:e})")]
    MaxItersExceeded {
        iterations: usize,
        merit: f64,
        x: Vec<f64>,
    },

    #[error("continuity report needs at least two rows")]
    TooFewRows,

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("problem file: {0}")]
    Parse(String),
}

impl Error {
    /// Last iterate carried by solver failures, if any.
    pub fn last_iterate(&self) -> Option<Vector> {
        match self {
            Error::NoDescentStep { x, .. } | Error::MaxItersExceeded { x, .. } => {
                Some(Vector::from_vec(x.clone()))
            }
            _ => None,
        }
    }

    /// True for failures of the descent itself, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoDescentStep { .. } | Error::MaxItersExceeded { .. }
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
