//! Eluder-dimension machinery: epsilon-dependence tests with certificates,
//! greedy and exhaustive eluder sequences, closed-form dimension bounds, the
//! Kolmogorov-dimension estimate and the expected-regret bound calculator.

mod bounds;
mod dependence;
mod regret;
mod sequence;

pub use bounds::{
    analytic_eluder_bound, b_bound, kolmogorov_dimension_estimate, kolmogorov_surrogate,
    trace_constrained_norm_bound, KolmogorovEstimate,
};
pub use dependence::{is_dependent, verify_witness, DependenceCheck, Verdict, Witness, DEPENDENCE_REL_TOL};
pub use regret::{bound_curve, regret_bound, BoundReport, ClassTerms, LqrConstants};
pub use sequence::{
    exhaustive_eluder_dimension, greedy_eluder_sequence, EluderInstance, EluderSequence, EXHAUSTIVE_POOL_LIMIT,
};

use thiserror::Error;

use crate::confsets::ConfsetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EluderError {
    #[error("operation not supported for {0} classes")]
    Unsupported(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error(transparent)]
    Confset(#[from] ConfsetError),
}
