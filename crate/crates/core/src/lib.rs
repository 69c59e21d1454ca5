//! Model-based reinforcement learning laboratory for parameterized episodic MDPs.
//!
//! The crate is organised around the pieces needed to run and check
//! posterior-sampling and optimistic agents:
//!
//! - [`mdp`]: episodic MDP abstractions, backward-induction planning, rollouts
//!   and regret accounting.
//! - [`environments`]: tabular, bounded linear-quadratic and generalized-linear
//!   environment families.
//! - [`posteriors`]: conjugate posteriors and exact posterior sampling.
//! - [`agents`]: PSRL, UCRL-Eluder and baselines.
//! - [`confsets`]: least-squares confidence sets, the `beta_star` radius, set
//!   widths and the width/coverage verifiers.
//! - [`eluder`]: eluder-dimension sequences, analytic bounds and the regret
//!   bound calculator.
//! - [`harness`]: config-driven experiment runner, scaling regression and the
//!   verification suite.

pub mod agents;
pub mod confsets;
pub mod eluder;
pub mod environments;
pub mod harness;
pub mod mdp;
pub mod posteriors;
pub mod stats;

pub use nalgebra::{DMatrix, DVector};

/// Tolerance used by exact-arithmetic code paths.
pub const EXACT_TOL: f64 = 1e-9;
