//! Episodic finite-horizon MDP abstractions, planning by backward induction,
//! rollouts and regret accounting.
//!
//! Steps inside an episode are indexed `0..horizon` (step `i` here is step
//! `i + 1` in the usual one-based notation). Global time is one-based, and
//! episode `k` (one-based) starts at `t_k = (k - 1) * horizon + 1`.

mod history;
mod planning;
mod rollout;

pub use history::{EpisodeRegret, History, RegretRecord, Transition};
pub use planning::{
    bellman_backup, episode_regret, evaluate_policy, plan, plan_finite_horizon, q_values,
    ModelRef, PlannedPolicy, TabularPolicy, TabularValue,
};
pub use rollout::{rollout, Step, Trajectory};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("action {action} is outside the action set ({detail})")]
    InvalidAction { action: String, detail: String },
    #[error("no planner registered for {0}")]
    UnsupportedModel(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("history out of order: {0}")]
    History(String),
}

/// An episodic MDP that can be simulated.
///
/// Implementations are immutable; all randomness comes from the caller's generator.
pub trait EpisodicMdp {
    type State: Clone + std::fmt::Debug;
    type Action: Clone + std::fmt::Debug;

    /// Steps per episode, at least one.
    fn horizon(&self) -> usize;

    /// Draws `s_1 ~ rho`.
    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn check_action(&self, action: &Self::Action) -> Result<(), MdpError>;

    fn mean_reward(&self, state: &Self::State, action: &Self::Action) -> f64;

    /// Samples `(r, s')` for one step. The action has already been checked.
    fn sample_step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut R,
    ) -> (f64, Self::State);
}

/// A (possibly randomized) policy mapping `(state, step)` to an action.
pub trait Policy<S, A> {
    fn act<R: Rng + ?Sized>(&self, state: &S, step: usize, rng: &mut R) -> A;
}

/// Initial-state distribution over a finite state space.
///
/// Defaults to a point mass; a finite mixture is also supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDistribution {
    Point(usize),
    Mixture(Vec<(usize, f64)>),
}

impl Default for InitialDistribution {
    fn default() -> Self {
        InitialDistribution::Point(0)
    }
}

impl InitialDistribution {
    pub fn validate(&self, n_states: usize) -> Result<(), MdpError> {
        match self {
            InitialDistribution::Point(s) if *s < n_states => Ok(()),
            InitialDistribution::Point(s) => Err(MdpError::InvalidModel(format!(
                "initial state {s} out of range for {n_states} states"
            ))),
            InitialDistribution::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(MdpError::InvalidModel("empty initial mixture".into()));
                }
                let mut total = 0.0;
                for &(s, w) in parts {
                    if s >= n_states || !(w >= 0.0) {
                        return Err(MdpError::InvalidModel(format!(
                            "bad initial mixture component ({s}, {w})"
                        )));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(MdpError::InvalidModel(format!(
                        "initial mixture sums to {total}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `(state, weight)` pairs with positive weight.
    pub fn support(&self) -> Vec<(usize, f64)> {
        match self {
            InitialDistribution::Point(s) => vec![(*s, 1.0)],
            InitialDistribution::Mixture(parts) => {
                parts.iter().copied().filter(|&(_, w)| w > 0.0).collect()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            InitialDistribution::Point(s) => *s,
            InitialDistribution::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(s, w) in parts {
                    acc += w;
                    if u < acc {
                        return s;
                    }
                }
                parts.last().map(|p| p.0).unwrap_or(0)
            }
        }
    }

    /// `E_rho[values(s)]`.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.support().iter().map(|&(s, w)| w * values[s]).sum()
    }
}
