use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodicMdp, MdpError, Policy};
use crate::environments::{BoundedLqr, GlmMdp, LqrPlan, TabularMdp};

/// Tolerance for transition-row normalization checks inside backups.
const ROW_TOL: f64 = 1e-9;

/// Deterministic tabular policy `mu(s, i)`, optionally mixed with uniform
/// exploration: with probability `explore` a uniformly random action is taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    /// Indexed `step * n_states + state`.
    actions: Vec<usize>,
    explore: f64,
}

impl TabularPolicy {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        actions: Vec<usize>,
    ) -> Result<Self, MdpError> {
        if actions.len() != n_states * horizon {
            return Err(MdpError::DimensionMismatch {
                expected: n_states * horizon,
                actual: actions.len(),
            });
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(MdpError::InvalidAction {
                action: a.to_string(),
                detail: format!("{n_actions} actions"),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            horizon,
            actions,
            explore: 0.0,
        })
    }

    /// Always plays `action`.
    pub fn constant(n_states: usize, n_actions: usize, horizon: usize, action: usize) -> Self {
        Self::new(n_states, n_actions, horizon, vec![action; n_states * horizon])
            .expect("constant action must be in range")
    }

    /// Uniformly random actions at every step.
    pub fn uniform(n_states: usize, n_actions: usize, horizon: usize) -> Self {
        Self::constant(n_states, n_actions, horizon, 0).with_exploration(1.0)
    }

    pub fn with_exploration(mut self, explore: f64) -> Self {
        self.explore = explore.clamp(0.0, 1.0);
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn exploration(&self) -> f64 {
        self.explore
    }

    pub fn greedy_action(&self, step: usize, state: usize) -> usize {
        self.actions[step * self.n_states + state]
    }

    /// Action distribution at `(step, state)`.
    pub fn action_probs(&self, step: usize, state: usize) -> Vec<f64> {
        let mut probs = vec![self.explore / self.n_actions as f64; self.n_actions];
        probs[self.greedy_action(step, state)] += 1.0 - self.explore;
        probs
    }
}

impl Policy<usize, usize> for TabularPolicy {
    fn act<R: Rng + ?Sized>(&self, state: &usize, step: usize, rng: &mut R) -> usize {
        if self.explore > 0.0 && rng.random::<f64>() < self.explore {
            rng.random_range(0..self.n_actions)
        } else {
            self.greedy_action(step, *state)
        }
    }
}

/// Per-step value table `V_i(s)` for `i = 0..=horizon`, with `V_horizon == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularValue {
    values: Vec<Vec<f64>>,
}

impl TabularValue {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn at(&self, i: usize, state: usize) -> f64 {
        self.values[i][state]
    }
}

fn check_rows(mdp: &TabularMdp, pairs: impl Iterator<Item = (usize, usize)>) -> Result<(), MdpError> {
    for (s, a) in pairs {
        let row = mdp.transition_row(s, a);
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL || row.iter().any(|p| !(*p >= 0.0)) {
            return Err(MdpError::InvalidModel(format!(
                "transition row ({s}, {a}) sums to {sum}"
            )));
        }
    }
    Ok(())
}

fn expect_next(row: &[f64], next_value: &[f64]) -> f64 {
    row.iter().zip(next_value).map(|(p, v)| p * v).sum()
}

/// One-step lookahead values `r(s, a) + sum_s' P(s'|s, a) V(s')` for every action.
pub fn q_values(mdp: &TabularMdp, state: usize, next_value: &[f64]) -> Vec<f64> {
    (0..mdp.n_actions())
        .map(|a| mdp.reward(state, a) + expect_next(mdp.transition_row(state, a), next_value))
        .collect()
}

/// Bellman operator for a deterministic step policy: returns
/// `(T_mu V)(s) = r(s, mu(s)) + sum_s' P(s'|s, mu(s)) V(s')` for every state.
pub fn bellman_backup(
    mdp: &TabularMdp,
    policy_step: &[usize],
    next_value: &[f64],
) -> Result<Vec<f64>, MdpError> {
    let n = mdp.n_states();
    if policy_step.len() != n {
        return Err(MdpError::DimensionMismatch {
            expected: n,
            actual: policy_step.len(),
        });
    }
    if next_value.len() != n {
        return Err(MdpError::DimensionMismatch {
            expected: n,
            actual: next_value.len(),
        });
    }
    if let Some(&a) = policy_step.iter().find(|&&a| a >= mdp.n_actions()) {
        return Err(MdpError::InvalidAction {
            action: a.to_string(),
            detail: format!("{} actions", mdp.n_actions()),
        });
    }
    check_rows(mdp, policy_step.iter().copied().enumerate())?;
    Ok(policy_step
        .iter()
        .enumerate()
        .map(|(s, &a)| mdp.reward(s, a) + expect_next(mdp.transition_row(s, a), next_value))
        .collect())
}

fn all_pairs(mdp: &TabularMdp) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..mdp.n_states()).flat_map(move |s| (0..mdp.n_actions()).map(move |a| (s, a)))
}

/// Exact policy evaluation `V^M_{mu, i}` by the dynamic programming recursion.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<TabularValue, MdpError> {
    let (n, tau) = (mdp.n_states(), mdp.horizon());
    if policy.n_states() != n || policy.n_actions() != mdp.n_actions() {
        return Err(MdpError::DimensionMismatch {
            expected: n * mdp.n_actions(),
            actual: policy.n_states() * policy.n_actions(),
        });
    }
    if policy.horizon() < tau {
        return Err(MdpError::DimensionMismatch {
            expected: tau,
            actual: policy.horizon(),
        });
    }
    check_rows(mdp, all_pairs(mdp))?;
    let mut values = vec![vec![0.0; n]; tau + 1];
    for i in (0..tau).rev() {
        let (head, tail) = values.split_at_mut(i + 1);
        let next = &tail[0];
        for s in 0..n {
            let q = q_values(mdp, s, next);
            head[i][s] = policy
                .action_probs(i, s)
                .iter()
                .zip(&q)
                .map(|(p, q)| p * q)
                .sum();
        }
    }
    Ok(TabularValue { values })
}

/// Backward induction. Ties are broken by the lowest action index.
pub fn plan_finite_horizon(mdp: &TabularMdp) -> Result<(TabularPolicy, TabularValue), MdpError> {
    let (n, m, tau) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    check_rows(mdp, all_pairs(mdp))?;
    let mut values = vec![vec![0.0; n]; tau + 1];
    let mut actions = vec![0usize; n * tau];
    for i in (0..tau).rev() {
        let (head, tail) = values.split_at_mut(i + 1);
        let next = &tail[0];
        for s in 0..n {
            let q = q_values(mdp, s, next);
            let mut best = 0;
            for a in 1..m {
                if q[a] > q[best] {
                    best = a;
                }
            }
            actions[i * n + s] = best;
            head[i][s] = q[best];
        }
    }
    let policy = TabularPolicy::new(n, m, tau, actions)?;
    Ok((policy, TabularValue { values }))
}

/// `Delta = E_rho[V*_{mu*,1} - V*_{mu,1}]` on the true MDP, computed exactly.
pub fn episode_regret(true_mdp: &TabularMdp, executed: &TabularPolicy) -> Result<f64, MdpError> {
    let (_, optimal) = plan_finite_horizon(true_mdp)?;
    let achieved = evaluate_policy(true_mdp, executed)?;
    let rho = true_mdp.initial();
    Ok(rho.expectation(optimal.step(0)) - rho.expectation(achieved.step(0)))
}

/// Borrowed view of any supported environment.
#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    Tabular(&'a TabularMdp),
    Lqr(&'a BoundedLqr),
    Glm(&'a GlmMdp),
}

/// Output of [`plan`].
#[derive(Debug, Clone)]
pub enum PlannedPolicy {
    Tabular(TabularPolicy, TabularValue),
    Lqr(LqrPlan),
}

/// Dispatches to the registered planner for the model family.
pub fn plan(model: ModelRef<'_>) -> Result<PlannedPolicy, MdpError> {
    match model {
        ModelRef::Tabular(mdp) => {
            let (policy, value) = plan_finite_horizon(mdp)?;
            Ok(PlannedPolicy::Tabular(policy, value))
        }
        ModelRef::Lqr(lqr) => Ok(PlannedPolicy::Lqr(lqr.riccati_plan())),
        ModelRef::Glm(_) => Err(MdpError::UnsupportedModel(
            "generalized-linear MDP".into(),
        )),
    }
}
