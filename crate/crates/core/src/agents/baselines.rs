use rand::Rng;

use super::{initial_value, planning_error, Agent, AgentDiagnostics, AgentError};
use crate::environments::{Noise, TabularMdp};
use crate::mdp::{plan_finite_horizon, InitialDistribution, MdpError, TabularPolicy, Transition};

/// Certainty-equivalent planning on the empirical model, with uniform
/// exploration at rate `epsilon` at every step.
///
/// Unvisited pairs get reward 0 and a uniform next-state distribution.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    epsilon: f64,
    initial: InitialDistribution,
    counts: Vec<usize>,
    reward_sums: Vec<f64>,
    next_counts: Vec<usize>,
    diag: AgentDiagnostics,
}

impl EpsilonGreedy {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        epsilon: f64,
        initial: InitialDistribution,
    ) -> Result<Self, AgentError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(MdpError::InvalidModel(format!("epsilon must lie in [0, 1], got {epsilon}")).into());
        }
        initial.validate(n_states)?;
        let pairs = n_states * n_actions;
        Ok(Self {
            n_states,
            n_actions,
            horizon,
            epsilon,
            initial,
            counts: vec![0; pairs],
            reward_sums: vec![0.0; pairs],
            next_counts: vec![0; pairs * n_states],
            diag: AgentDiagnostics::default(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The maximum-likelihood model of the data seen so far.
    pub fn empirical_mdp(&self) -> TabularMdp {
        let n = self.n_states;
        let pairs = n * self.n_actions;
        let mut rewards = vec![0.0; pairs];
        let mut transitions = vec![1.0 / n as f64; pairs * n];
        for x in 0..pairs {
            let c = self.counts[x];
            if c == 0 {
                continue;
            }
            rewards[x] = self.reward_sums[x] / c as f64;
            for j in 0..n {
                transitions[x * n + j] = self.next_counts[x * n + j] as f64 / c as f64;
            }
        }
        TabularMdp::new_unchecked(
            n,
            self.n_actions,
            self.horizon,
            rewards,
            transitions,
            Noise::None,
            self.initial.clone(),
        )
    }
}

impl Agent for EpsilonGreedy {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        "epsilon-greedy"
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, _t_start: usize, _rng: &mut R) -> Result<TabularPolicy, AgentError> {
        let mdp = self.empirical_mdp();
        let (policy, value) = plan_finite_horizon(&mdp).map_err(planning_error(k))?;
        self.diag = AgentDiagnostics {
            episode: k,
            planned_value: Some(initial_value(&mdp, &value)),
            ..AgentDiagnostics::default()
        };
        Ok(policy.with_exploration(self.epsilon))
    }

    fn observe(&mut self, tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        let (n, m) = (self.n_states, self.n_actions);
        if tr.state >= n || tr.action >= m || tr.next_state >= n {
            return Err(MdpError::InvalidAction {
                action: tr.action.to_string(),
                detail: format!("transition from {} to {} with {n} states and {m} actions", tr.state, tr.next_state),
            }
            .into());
        }
        let x = tr.state * m + tr.action;
        self.counts[x] += 1;
        self.reward_sums[x] += tr.reward;
        self.next_counts[x * n + tr.next_state] += 1;
        Ok(())
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}

/// Plays the optimal policy of the true MDP. Its regret is zero by
/// construction, which makes it a check on the regret accounting.
#[derive(Debug, Clone)]
pub struct Oracle {
    policy: TabularPolicy,
    value: f64,
    diag: AgentDiagnostics,
}

impl Oracle {
    pub fn new(truth: &TabularMdp) -> Result<Self, AgentError> {
        let (policy, value) = plan_finite_horizon(truth)?;
        Ok(Self {
            policy,
            value: initial_value(truth, &value),
            diag: AgentDiagnostics::default(),
        })
    }
}

impl Agent for Oracle {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        "oracle"
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, _t_start: usize, _rng: &mut R) -> Result<TabularPolicy, AgentError> {
        self.diag = AgentDiagnostics {
            episode: k,
            planned_value: Some(self.value),
            ..AgentDiagnostics::default()
        };
        Ok(self.policy.clone())
    }

    fn observe(&mut self, _tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        Ok(())
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}

/// Picks actions uniformly at random and never learns.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    policy: TabularPolicy,
    diag: AgentDiagnostics,
}

impl UniformRandom {
    pub fn new(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self {
            policy: TabularPolicy::uniform(n_states, n_actions, horizon),
            diag: AgentDiagnostics::default(),
        }
    }
}

impl Agent for UniformRandom {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        "uniform"
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, _t_start: usize, _rng: &mut R) -> Result<TabularPolicy, AgentError> {
        self.diag.episode = k;
        Ok(self.policy.clone())
    }

    fn observe(&mut self, _tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        Ok(())
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}
