use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EpisodicMdp, MdpError, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step<S, A> {
    pub state: S,
    pub action: A,
    pub reward: f64,
    pub next_state: S,
}

/// One simulated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S, A> {
    pub steps: Vec<Step<S, A>>,
}

impl<S, A> Trajectory<S, A> {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Simulates up to `max_steps` (at most one full episode) under `policy`.
///
/// Deterministic given the generator state. Every action is checked against
/// the action set before it is applied.
pub fn rollout<M, P, R>(
    mdp: &M,
    policy: &P,
    max_steps: usize,
    rng: &mut R,
) -> Result<Trajectory<M::State, M::Action>, MdpError>
where
    M: EpisodicMdp,
    P: Policy<M::State, M::Action>,
    R: Rng + ?Sized,
{
    let n = max_steps.min(mdp.horizon());
    let mut steps = Vec::with_capacity(n);
    let mut state = mdp.sample_initial(rng);
    for i in 0..n {
        let action = policy.act(&state, i, rng);
        mdp.check_action(&action)?;
        let (reward, next_state) = mdp.sample_step(&state, &action, rng);
        steps.push(Step {
            state: state.clone(),
            action,
            reward,
            next_state: next_state.clone(),
        });
        state = next_state;
    }
    Ok(Trajectory { steps })
}
