//! Learning agents: posterior sampling (PSRL), optimistic UCRL-Eluder for
//! tabular MDPs, and simple baselines.
//!
//! Every agent resamples or replans only at episode boundaries. All
//! randomness comes from the generator passed to `begin_episode`, so the
//! returned policy is a deterministic function of the observed history and
//! the generator state.

mod baselines;
mod driver;
mod inner;
mod psrl;
mod ucrl;

pub use baselines::{EpsilonGreedy, Oracle, UniformRandom};
pub use driver::{run_tabular_agent, EpisodeOutcome};
pub use inner::{
    max_over_simplex_ball, max_over_simplex_l1, project_simplex, project_simplex_ball, InnerSolution, InnerSolver,
    INNER_MAX_ITERS, INNER_TOL,
};
pub use psrl::{LqrPsrl, Psrl};
pub use ucrl::{OptimisticPlan, UcrlEluder};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confsets::ConfsetError;
use crate::environments::TabularMdp;
use crate::mdp::{MdpError, Policy, TabularPolicy, Transition};
use crate::posteriors::PosteriorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("planning failed in episode {episode}: {source}")]
    Planning { episode: usize, source: MdpError },
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Confset(#[from] ConfsetError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Per-episode bookkeeping exposed for logging and tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentDiagnostics {
    pub episode: usize,
    /// Value at the initial distribution of the model the agent planned
    /// against: the sampled MDP for PSRL, the optimistic value for UCRL.
    pub planned_value: Option<f64>,
    /// `(beta_R, beta_P)` used by confidence-set agents.
    pub betas: Option<(f64, f64)>,
    /// Pairs whose reward interval was numerically empty this episode.
    pub empty_reward_sets: usize,
    /// Inner maximizations that hit the iteration cap this episode.
    pub unconverged_inner: usize,
}

impl AgentDiagnostics {
    /// True when a confidence-set fallback was used this episode.
    pub fn flagged(&self) -> bool {
        self.empty_reward_sets > 0
    }
}

/// An episodic learning algorithm.
pub trait Agent {
    type State;
    type Action;
    type Policy: Policy<Self::State, Self::Action>;

    fn name(&self) -> &'static str;

    /// Policy for one-based episode `k` starting at time `t_start`.
    fn begin_episode<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        t_start: usize,
        rng: &mut R,
    ) -> Result<Self::Policy, AgentError>;

    fn observe(&mut self, tr: &Transition<Self::State, Self::Action>) -> Result<(), AgentError>;

    fn diagnostics(&self) -> &AgentDiagnostics;
}

/// Runtime choice among the tabular agents.
#[derive(Debug, Clone)]
pub enum TabularAgent {
    Psrl(Box<Psrl>),
    UcrlEluder(Box<UcrlEluder>),
    EpsilonGreedy(Box<EpsilonGreedy>),
    Oracle(Box<Oracle>),
    Uniform(UniformRandom),
}

macro_rules! dispatch {
    ($self:ident, $a:ident => $e:expr) => {
        match $self {
            TabularAgent::Psrl($a) => $e,
            TabularAgent::UcrlEluder($a) => $e,
            TabularAgent::EpsilonGreedy($a) => $e,
            TabularAgent::Oracle($a) => $e,
            TabularAgent::Uniform($a) => $e,
        }
    };
}

impl Agent for TabularAgent {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        dispatch!(self, a => a.name())
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, t_start: usize, rng: &mut R) -> Result<TabularPolicy, AgentError> {
        dispatch!(self, a => a.begin_episode(k, t_start, rng))
    }

    fn observe(&mut self, tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        dispatch!(self, a => a.observe(tr))
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        dispatch!(self, a => a.diagnostics())
    }
}

fn planning_error(episode: usize) -> impl Fn(MdpError) -> AgentError {
    move |source| AgentError::Planning { episode, source }
}

/// Value of `mdp` under its optimal policy at the initial distribution.
fn initial_value(mdp: &TabularMdp, value: &crate::mdp::TabularValue) -> f64 {
    mdp.initial().expectation(value.step(0))
}
