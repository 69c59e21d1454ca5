use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentDiagnostics, AgentError};
use crate::environments::TabularMdp;
use crate::mdp::{evaluate_policy, plan_finite_horizon, EpisodicMdp, rollout, RegretRecord, TabularPolicy, Transition};

/// Everything recorded about one episode of a tabular run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode: usize,
    pub t_start: usize,
    /// Exact expected regret of the executed policy.
    pub delta: f64,
    pub realized_return: f64,
    /// The episode was cut short by the step budget.
    pub truncated: bool,
    pub transitions: Vec<Transition<usize, usize>>,
    pub diagnostics: AgentDiagnostics,
}

/// Runs `agent` on `env` for `total_steps` steps, i.e. `ceil(T / tau)`
/// episodes with the last one truncated when `tau` does not divide `T`.
///
/// Each episode: the agent commits to a policy, one trajectory is simulated
/// and fed back step by step, and the exact regret of the committed policy
/// is recorded. `observer` sees every episode after the agent has observed
/// it. All randomness (agent and environment) comes from `rng`.
pub fn run_tabular_agent<A, R, F>(
    agent: &mut A,
    env: &TabularMdp,
    total_steps: usize,
    rng: &mut R,
    mut observer: F,
) -> Result<RegretRecord, AgentError>
where
    A: Agent<State = usize, Action = usize, Policy = TabularPolicy>,
    R: Rng + ?Sized,
    F: FnMut(&EpisodeOutcome),
{
    let tau = env.horizon();
    let (_, optimal) = plan_finite_horizon(env)?;
    let v_star = env.initial().expectation(optimal.step(0));
    let mut record = RegretRecord::new();
    for k in 1..=total_steps.div_ceil(tau) {
        let t_start = (k - 1) * tau + 1;
        let steps = tau.min(total_steps + 1 - t_start);
        let policy = agent.begin_episode(k, t_start, rng)?;
        let achieved = evaluate_policy(env, &policy)?;
        let delta = v_star - env.initial().expectation(achieved.step(0));
        let traj = rollout(env, &policy, steps, rng)?;
        let mut transitions = Vec::with_capacity(traj.len());
        for (i, st) in traj.steps.into_iter().enumerate() {
            let tr = Transition {
                t: t_start + i,
                episode: k,
                step: i,
                state: st.state,
                action: st.action,
                reward: st.reward,
                next_state: st.next_state,
            };
            agent.observe(&tr)?;
            transitions.push(tr);
        }
        let realized_return = transitions.iter().map(|tr| tr.reward).sum();
        let row = record.push(t_start, delta, realized_return, v_star);
        observer(&EpisodeOutcome {
            episode: k,
            t_start,
            delta: row.delta,
            realized_return,
            truncated: steps < tau,
            transitions,
            diagnostics: agent.diagnostics().clone(),
        });
    }
    Ok(record)
}
