//! Least-squares confidence sets, the `beta*` radius, set widths and the
//! width and coverage verifiers.

mod beta;
mod class;
mod covering;
mod lsq;
mod sets;
mod tabular;
mod verify;

pub use beta::{beta_star, beta_star_from, BetaSchedule, BetaTracker};
pub use class::{quadratic_features, FiniteClass, FunctionClass, GlmClass, LinearClass, QuadraticClass};
pub use covering::{covering_number, greedy_cover, probe_distance, CoveringNumber};
pub use lsq::{
    least_squares_fit, predict, regression_features, solve_normal_equations, squared_loss, Center, Input,
    LsqFit, Observation, NEWTON_GRAD_TOL, NORMAL_EQUATIONS_RIDGE,
};
pub use sets::{FiniteConfidenceSet, ParametricConfidenceSet};
pub use tabular::{RewardInterval, TabularConfidence};
pub use verify::{
    coverage_test_class, verify_coverage, verify_width_count, verify_width_sum, CoverageReport,
    CoverageSettings, WidthCountReport, WidthSumReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfsetError {
    #[error("invalid function class: {0}")]
    InvalidClass(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("covering number {0} is below one")]
    InvalidCovering(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}
