use serde::{Deserialize, Serialize};

use super::MdpError;

/// One observed interaction `(s_t, a_t, r_t, s_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<S, A> {
    /// One-based global time.
    pub t: usize,
    /// One-based episode index.
    pub episode: usize,
    /// Zero-based step within the episode.
    pub step: usize,
    pub state: S,
    pub action: A,
    pub reward: f64,
    pub next_state: S,
}

/// The ordered record `H_t` of observations made prior to time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History<S, A> {
    horizon: usize,
    transitions: Vec<Transition<S, A>>,
}

impl<S, A> History<S, A> {
    pub fn new(horizon: usize) -> Self {
        assert!(horizon >= 1, "horizon must be at least 1");
        Self {
            horizon,
            transitions: Vec::new(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition<S, A>] {
        &self.transitions
    }

    /// Start time of one-based episode `k`.
    pub fn episode_start(&self, k: usize) -> usize {
        (k - 1) * self.horizon + 1
    }

    /// The time of the next observation.
    pub fn next_time(&self) -> usize {
        self.transitions.last().map_or(1, |tr| tr.t + 1)
    }

    /// Appends a transition, enforcing strictly increasing time and episode
    /// boundaries at `t_k = (k - 1) tau + 1`.
    pub fn push(&mut self, tr: Transition<S, A>) -> Result<(), MdpError> {
        let expected_t = self.next_time();
        if tr.t != expected_t {
            return Err(MdpError::History(format!(
                "expected t = {expected_t}, got {}",
                tr.t
            )));
        }
        if tr.step >= self.horizon || tr.episode == 0 {
            return Err(MdpError::History(format!(
                "step {} / episode {} invalid for horizon {}",
                tr.step, tr.episode, self.horizon
            )));
        }
        if self.episode_start(tr.episode) + tr.step != tr.t {
            return Err(MdpError::History(format!(
                "t = {} does not match episode {} step {}",
                tr.t, tr.episode, tr.step
            )));
        }
        self.transitions.push(tr);
        Ok(())
    }

    /// Transitions belonging to one-based episode `k`.
    pub fn episode(&self, k: usize) -> &[Transition<S, A>] {
        let start = (k - 1) * self.horizon;
        if start >= self.transitions.len() {
            return &[];
        }
        let end = (start + self.horizon).min(self.transitions.len());
        &self.transitions[start..end]
    }
}

/// Per-episode regret row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRegret {
    pub episode: usize,
    pub t_start: usize,
    pub delta: f64,
    pub cumulative: f64,
    pub realized_return: f64,
    pub optimal_value: f64,
}

/// Regret accounting over episodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    rows: Vec<EpisodeRegret>,
}

impl RegretRecord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> &[EpisodeRegret] {
        &self.rows
    }

    pub fn cumulative(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative)
    }

    /// Records `Delta_k`. Tiny negative values from floating-point error are
    /// clamped to zero so that the cumulative sum is nondecreasing; larger
    /// negative values are kept (they indicate an inexact planner).
    pub fn push(
        &mut self,
        t_start: usize,
        delta: f64,
        realized_return: f64,
        optimal_value: f64,
    ) -> EpisodeRegret {
        let delta = if delta < 0.0 && delta > -crate::EXACT_TOL {
            0.0
        } else {
            delta
        };
        let row = EpisodeRegret {
            episode: self.rows.len() + 1,
            t_start,
            delta,
            cumulative: self.cumulative() + delta,
            realized_return,
            optimal_value,
        };
        self.rows.push(row);
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(t: usize, episode: usize, step: usize) -> Transition<usize, usize> {
        Transition {
            t,
            episode,
            step,
            state: 0,
            action: 0,
            reward: 0.0,
            next_state: 0,
        }
    }

    #[test]
    fn history_enforces_episode_alignment() {
        let mut h = History::new(3);
        h.push(tr(1, 1, 0)).unwrap();
        h.push(tr(2, 1, 1)).unwrap();
        h.push(tr(3, 1, 2)).unwrap();
        h.push(tr(4, 2, 0)).unwrap();
        assert_eq!(h.episode(2).len(), 1);
        assert!(h.push(tr(6, 2, 2)).is_err());
        assert!(h.push(tr(5, 3, 0)).is_err());
        assert_eq!(h.episode_start(3), 7);
    }

    #[test]
    fn regret_record_accumulates() {
        let mut r = RegretRecord::new();
        r.push(1, 0.5, 1.0, 1.5);
        r.push(4, -1e-12, 1.5, 1.5);
        r.push(7, 0.25, 1.25, 1.5);
        assert_eq!(r.rows()[1].delta, 0.0);
        assert!((r.cumulative() - 0.75).abs() < 1e-15);
        assert!(r.rows().windows(2).all(|w| w[1].cumulative >= w[0].cumulative));
    }
}
