use serde::{Deserialize, Serialize};

use super::{BetaSchedule, BetaTracker, ConfsetError, FunctionClass};

/// Per-pair sufficient statistics of the tabular reward and transition
/// confidence sets.
///
/// Both classes are linear with one-hot features, so the empirical norm
/// decouples over pairs: `||f - f_hat||^2_{2,E_t} = sum_x n_x ||f(x) - f_hat(x)||^2`.
/// Each pair is given the full joint radius, i.e. the box containing the
/// joint ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularConfidence {
    n_states: usize,
    n_actions: usize,
    counts: Vec<usize>,
    reward_sums: Vec<f64>,
    next_counts: Vec<usize>,
    reward_range: (f64, f64),
    pub beta_r: BetaTracker,
    pub beta_p: BetaTracker,
}

/// Reward interval for one pair; `empty` when the ball misses the class range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardInterval {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

impl TabularConfidence {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        reward_range: (f64, f64),
        sigma_r: f64,
        delta: f64,
        schedule: BetaSchedule,
        total_steps: usize,
    ) -> Self {
        let pairs = n_states * n_actions;
        let bound = reward_range.0.abs().max(reward_range.1.abs());
        Self {
            n_states,
            n_actions,
            counts: vec![0; pairs],
            reward_sums: vec![0.0; pairs],
            next_counts: vec![0; pairs * n_states],
            reward_range,
            beta_r: BetaTracker::new(FunctionClass::tabular_rewards(pairs, bound, sigma_r), schedule, delta, total_steps),
            beta_p: BetaTracker::new(FunctionClass::tabular_transitions(n_states, pairs), schedule, delta, total_steps),
        }
    }

    /// Multiplies both radii by `scale` (negative controls).
    pub fn with_beta_scale(mut self, scale: f64) -> Self {
        self.beta_r = self.beta_r.with_scale(scale);
        self.beta_p = self.beta_p.with_scale(scale);
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }

    pub fn count(&self, pair: usize) -> usize {
        self.counts[pair]
    }

    pub fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) -> Result<(), ConfsetError> {
        if s >= self.n_states || a >= self.n_actions || next >= self.n_states {
            return Err(ConfsetError::DimensionMismatch {
                expected: self.n_states,
                actual: s.max(next),
            });
        }
        let x = s * self.n_actions + a;
        self.counts[x] += 1;
        self.reward_sums[x] += reward;
        self.next_counts[x * self.n_states + next] += 1;
        Ok(())
    }

    /// Advances both radii to episode `k` starting at time `t`.
    pub fn advance(&mut self, k: usize, t: usize) -> Result<(f64, f64), ConfsetError> {
        Ok((self.beta_r.advance(k, t)?, self.beta_p.advance(k, t)?))
    }

    pub fn betas(&self) -> (f64, f64) {
        (self.beta_r.current(), self.beta_p.current())
    }

    /// Least-squares mean reward (0 for unvisited pairs).
    pub fn reward_center(&self, pair: usize) -> f64 {
        match self.counts[pair] {
            0 => 0.0,
            n => self.reward_sums[pair] / n as f64,
        }
    }

    /// Empirical next-state distribution (uniform for unvisited pairs).
    pub fn transition_center(&self, pair: usize) -> Vec<f64> {
        let row = &self.next_counts[pair * self.n_states..(pair + 1) * self.n_states];
        match self.counts[pair] {
            0 => vec![1.0 / self.n_states as f64; self.n_states],
            n => row.iter().map(|&c| c as f64 / n as f64).collect(),
        }
    }

    /// `[c - sqrt(beta/n), c + sqrt(beta/n)]` intersected with the reward range.
    pub fn reward_interval(&self, pair: usize) -> RewardInterval {
        let (lo, hi) = self.reward_range;
        let center = self.reward_center(pair);
        let n = self.counts[pair];
        if n == 0 {
            return RewardInterval {
                center,
                lo,
                hi,
                empty: false,
            };
        }
        let r = (self.beta_r.current() / n as f64).sqrt();
        let (a, b) = ((center - r).max(lo), (center + r).min(hi));
        RewardInterval {
            center,
            lo: a,
            hi: b,
            empty: a > b,
        }
    }

    /// 2-norm radius of the transition ball for `pair` (infinite if unvisited).
    pub fn transition_radius(&self, pair: usize) -> f64 {
        match self.counts[pair] {
            0 => f64::INFINITY,
            n => (self.beta_p.current() / n as f64).sqrt(),
        }
    }

    /// Exact reward-set width at `pair`.
    pub fn reward_width(&self, pair: usize) -> f64 {
        let iv = self.reward_interval(pair);
        if iv.empty {
            0.0
        } else {
            iv.hi - iv.lo
        }
    }

    /// Transition-set width at `pair`: the ball diameter clipped to the
    /// simplex diameter `sqrt(2)`.
    pub fn transition_width(&self, pair: usize) -> f64 {
        (2.0 * self.transition_radius(pair)).min(std::f64::consts::SQRT_2)
    }

    /// True when `rewards` and `transitions` (laid out like
    /// [`crate::environments::TabularMdp`]) lie inside both joint sets.
    pub fn contains(&self, rewards: &[f64], transitions: &[f64]) -> bool {
        let mut dr = 0.0;
        let mut dp = 0.0;
        for x in 0..self.counts.len() {
            let n = self.counts[x] as f64;
            if n == 0.0 {
                continue;
            }
            dr += n * (rewards[x] - self.reward_center(x)).powi(2);
            let c = self.transition_center(x);
            dp += n * transitions[x * self.n_states..(x + 1) * self.n_states]
                .iter()
                .zip(&c)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>();
        }
        dr <= self.beta_r.current() && dp <= self.beta_p.current()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unvisited_pairs_have_full_width() {
        let conf = TabularConfidence::new(3, 2, (0.0, 1.0), 0.5, 0.05, BetaSchedule::Episode, 100);
        assert_eq!(conf.reward_width(0), 1.0);
        assert_eq!(conf.transition_width(0), std::f64::consts::SQRT_2);
    }

    #[test]
    fn widths_shrink_with_visits() {
        let mut conf = TabularConfidence::new(2, 1, (0.0, 1.0), 0.1, 0.05, BetaSchedule::Episode, 100);
        conf.advance(1, 1).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..5000 {
            conf.observe(0, 0, 0.5, i % 2).unwrap();
            let w = conf.reward_width(0);
            assert!(w <= last);
            last = w;
        }
        assert!(last < 1.0);
        assert!((conf.transition_center(0)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_interval_is_flagged() {
        let mut conf = TabularConfidence::new(1, 1, (0.0, 1.0), 0.1, 0.05, BetaSchedule::Episode, 10).with_beta_scale(1e-6);
        conf.advance(1, 1).unwrap();
        conf.observe(0, 0, 5.0, 0).unwrap();
        let iv = conf.reward_interval(0);
        assert!(iv.empty);
        assert_eq!(conf.reward_width(0), 0.0);
    }
}
