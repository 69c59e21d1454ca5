//! Concrete MDP families: tabular, bounded linear-quadratic and
//! generalized-linear dynamics.

mod glm;
mod lqr;
mod noise;
mod tabular;

pub use glm::{GlmLink, GlmMdp, LINK_GRID_POINTS};
pub use lqr::{BoundedLqr, LinearFeedbackPolicy, LqrPlan, RICCATI_RIDGE};
pub use noise::{project_ball, Noise, TRUNCATION_SIGMAS};
pub use tabular::{TabularMdp, ROW_SUM_TOL};

/// `2 C lambda_1` for the Riccati solution of `lqr`.
pub fn lqr_lipschitz_constant(lqr: &BoundedLqr) -> f64 {
    lqr.riccati_plan().lipschitz_constant(lqr.radius())
}
