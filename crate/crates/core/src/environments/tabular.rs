use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Noise;
use crate::mdp::{EpisodicMdp, InitialDistribution, MdpError};

/// Tolerance on transition-row sums at construction.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Finite MDP with `n_states` states, `n_actions` actions and categorical transitions.
///
/// States and actions are indices. Reward observations are the mean reward
/// plus `reward_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    /// Indexed `s * n_actions + a`.
    rewards: Vec<f64>,
    /// Indexed `(s * n_actions + a) * n_states + s'`.
    transitions: Vec<f64>,
    reward_noise: Noise,
    initial: InitialDistribution,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        reward_noise: Noise,
        initial: InitialDistribution,
    ) -> Result<Self, MdpError> {
        if n_states == 0 || n_actions == 0 || horizon == 0 {
            return Err(MdpError::InvalidModel(
                "states, actions and horizon must be positive".into(),
            ));
        }
        let pairs = n_states * n_actions;
        if rewards.len() != pairs {
            return Err(MdpError::DimensionMismatch {
                expected: pairs,
                actual: rewards.len(),
            });
        }
        if transitions.len() != pairs * n_states {
            return Err(MdpError::DimensionMismatch {
                expected: pairs * n_states,
                actual: transitions.len(),
            });
        }
        if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
            return Err(MdpError::InvalidModel(format!("non-finite reward {r}")));
        }
        for (x, row) in transitions.chunks(n_states).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MdpError::InvalidModel(format!(
                    "transition row for pair {x} sums to {sum}"
                )));
            }
        }
        reward_noise.validate().map_err(MdpError::InvalidModel)?;
        initial.validate(n_states)?;
        Ok(Self::new_unchecked(
            n_states,
            n_actions,
            horizon,
            rewards,
            transitions,
            reward_noise,
            initial,
        ))
    }

    /// Builds the model without validating transition rows or rewards.
    /// Planning and backups still check the rows they touch.
    pub fn new_unchecked(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        reward_noise: Noise,
        initial: InitialDistribution,
    ) -> Self {
        Self {
            n_states,
            n_actions,
            horizon,
            rewards,
            transitions,
            reward_noise,
            initial,
        }
    }

    /// The RiverSwim chain: action 0 swims left deterministically, action 1
    /// swims right against the current. Swimming left at the left bank pays
    /// 0.005 and swimming right at the right bank pays 1.
    pub fn river_swim(n_states: usize, horizon: usize, reward_noise: Noise) -> Self {
        assert!(n_states >= 2, "river swim needs at least two states");
        let (n, m) = (n_states, 2);
        let mut rewards = vec![0.0; n * m];
        let mut trans = vec![0.0; n * m * n];
        for s in 0..n {
            let left = (s * m) * n;
            trans[left + s.saturating_sub(1)] = 1.0;
            let right = (s * m + 1) * n;
            if s == 0 {
                trans[right] = 0.6;
                trans[right + 1] = 0.4;
            } else if s == n - 1 {
                trans[right + s] = 0.6;
                trans[right + s - 1] = 0.4;
            } else {
                trans[right + s + 1] = 0.35;
                trans[right + s] = 0.6;
                trans[right + s - 1] = 0.05;
            }
        }
        rewards[0] = 0.005;
        rewards[(n - 1) * m + 1] = 1.0;
        Self::new(
            n,
            m,
            horizon,
            rewards,
            trans,
            reward_noise,
            InitialDistribution::Point(0),
        )
        .expect("river swim parameters are valid")
    }

    pub fn with_initial(mut self, initial: InitialDistribution) -> Self {
        initial
            .validate(self.n_states)
            .expect("initial distribution must match the state space");
        self.initial = initial;
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn initial(&self) -> &InitialDistribution {
        &self.initial
    }

    pub fn reward_noise(&self) -> Noise {
        self.reward_noise
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Largest absolute mean reward.
    pub fn reward_bound(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Lipschitz constant of the one-step future value with respect to the
    /// 2-norm of next-state distribution means, with discrete states embedded
    /// as one-hot vectors.
    ///
    /// For distributions `p, q` on the simplex, `|(p - q) . V| <= ||p - q||_2
    /// ||V - c 1||_2` for every constant `c`; the mean-centred choice gives the
    /// bound returned here, maximised over steps.
    pub fn future_value_lipschitz(&self) -> Result<f64, MdpError> {
        let (_, value) = crate::mdp::plan_finite_horizon(self)?;
        let mut k: f64 = 0.0;
        for i in 1..=self.horizon {
            let v = value.step(i);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            k = k.max(v.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt());
        }
        Ok(k)
    }
}

impl EpisodicMdp for TabularMdp {
    type State = usize;
    type Action = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.initial.sample(rng)
    }

    fn check_action(&self, action: &usize) -> Result<(), MdpError> {
        if *action < self.n_actions {
            Ok(())
        } else {
            Err(MdpError::InvalidAction {
                action: action.to_string(),
                detail: format!("{} actions", self.n_actions),
            })
        }
    }

    fn mean_reward(&self, state: &usize, action: &usize) -> f64 {
        self.reward(*state, *action)
    }

    fn sample_step<R: Rng + ?Sized>(&self, state: &usize, action: &usize, rng: &mut R) -> (f64, usize) {
        let reward = self.reward(*state, *action) + self.reward_noise.sample(rng);
        let row = self.transition_row(*state, *action);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = self.n_states - 1;
        for (s2, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = s2;
                break;
            }
        }
        (reward, next)
    }
}
