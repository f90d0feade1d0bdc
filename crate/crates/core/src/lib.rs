//! Caristi-descent solver for parametric set-valued inclusions
//! `F(p, x) ⊆ C` over polyhedral cones, with increase-bound estimation,
//! warm-started continuation and ideal efficiency for vector optimization.

pub mod catalog;
pub mod error;
pub mod geometry;
pub mod increase;
pub mod parametric;
pub mod problem_file;
pub mod sampling;
pub mod setmaps;
pub mod solver;
pub mod vopt;

pub use error::{Error, Result};
pub use geometry::{Matrix, PolyCone, SumSet, VPolytope, Vector};
pub use setmaps::{SetMap, SviProblem};
