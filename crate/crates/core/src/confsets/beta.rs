use serde::{Deserialize, Serialize};

use super::{covering_number, ConfsetError, CoveringNumber, FunctionClass};

/// `8 sigma^2 ln(N / delta) + 2 alpha t (8 C + sqrt(8 sigma^2 ln(4 t^2 / delta)))`
/// with `N` given on the log scale.
pub fn beta_star_from(cover: CoveringNumber, sigma: f64, c: f64, delta: f64, alpha: f64, t: usize) -> Result<f64, ConfsetError> {
    if !(delta > 0.0 && delta < 1.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConfsetError::InvalidArgument(format!(
            "delta and alpha must lie in (0, 1), got {delta}, {alpha}"
        )));
    }
    if t == 0 {
        return Err(ConfsetError::InvalidArgument("t must be at least 1".into()));
    }
    if !(cover.log_value >= 0.0) {
        return Err(ConfsetError::InvalidCovering(cover.value()));
    }
    let s2 = sigma * sigma;
    let t = t as f64;
    let log_term = 8.0 * s2 * (cover.log_value - delta.ln());
    let disc = 2.0 * alpha * t * (8.0 * c + (8.0 * s2 * (4.0 * t * t / delta).ln()).sqrt());
    Ok(log_term + disc)
}

/// `beta*(F, delta, alpha)` at time `t`, with the covering number of `class`
/// at scale `alpha` (finite classes probe their whole domain).
pub fn beta_star(class: &FunctionClass, delta: f64, alpha: f64, t: usize) -> Result<f64, ConfsetError> {
    let cover = covering_number(class, alpha, None)?;
    beta_star_from(cover, class.sigma(), class.c_bound(), delta, alpha, t)
}

/// How `beta*` is parameterized over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSchedule {
    /// `beta*(F, delta, 1/k^2)` at the start of episode `k`.
    #[default]
    Episode,
    /// `beta*(F, 1/(8T), 1/T^2)` for a known total horizon `T`.
    Horizon,
}

/// Produces a nondecreasing sequence of radii for one class.
///
/// The episode schedule shrinks `alpha` with `k`, which can make the raw
/// `beta*` dip; the tracker reports the running maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaTracker {
    class: FunctionClass,
    schedule: BetaSchedule,
    delta: f64,
    total_steps: usize,
    current: f64,
    /// Multiplier applied to every radius (1 for the unmodified schedule).
    scale: f64,
}

impl BetaTracker {
    pub fn new(class: FunctionClass, schedule: BetaSchedule, delta: f64, total_steps: usize) -> Self {
        Self {
            class,
            schedule,
            delta,
            total_steps: total_steps.max(2),
            current: 0.0,
            scale: 1.0,
        }
    }

    /// Multiplies every radius by `scale` (used for negative controls).
    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    /// Radius for episode `k` (one-based) starting at time `t` (one-based).
    pub fn advance(&mut self, k: usize, t: usize) -> Result<f64, ConfsetError> {
        let raw = match self.schedule {
            BetaSchedule::Episode => {
                let kf = k.max(1) as f64;
                // alpha = 1/k^2 must stay inside (0, 1).
                let alpha = (1.0 / (kf * kf)).min(0.5);
                beta_star(&self.class, self.delta, alpha, t.max(1))?
            }
            BetaSchedule::Horizon => {
                let big_t = self.total_steps as f64;
                beta_star(&self.class, 1.0 / (8.0 * big_t), 1.0 / (big_t * big_t), t.max(1))?
            }
        };
        self.current = self.current.max(raw * self.scale);
        Ok(self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confsets::FiniteClass;

    fn finite8() -> FunctionClass {
        let members = (0..8).map(|m| vec![m as f64 / 8.0, 0.5]).collect();
        FunctionClass::Finite(FiniteClass::new(2, 1, members, 1.0, 1.0).unwrap())
    }

    #[test]
    fn hand_evaluated_example() {
        let v = beta_star_from(CoveringNumber::exact(8), 1.0, 1.0, 0.125, 0.01, 100).unwrap();
        assert!((v - 69.41143310424289).abs() < 1e-10, "{v}");
    }

    #[test]
    fn vanishing_alpha_leaves_log_term() {
        let v = beta_star_from(CoveringNumber::exact(8), 1.0, 1.0, 0.05, 1e-14, 10).unwrap();
        assert!((v - 8.0 * (8.0f64 / 0.05).ln()).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_t_and_delta() {
        let class = finite8();
        let mut last = 0.0;
        for t in 1..200 {
            let v = beta_star(&class, 0.05, 0.01, t).unwrap();
            assert!(v >= last);
            last = v;
        }
        let mut last = f64::INFINITY;
        for d in [0.01, 0.05, 0.1, 0.3, 0.9] {
            let v = beta_star(&class, d, 0.01, 50).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let class = finite8();
        assert!(beta_star(&class, 0.0, 0.1, 1).is_err());
        assert!(beta_star(&class, 0.1, 1.0, 1).is_err());
        assert!(beta_star(&class, 0.1, 0.1, 0).is_err());
        let bad = CoveringNumber {
            log_value: -1.0,
            exact: true,
        };
        assert!(matches!(
            beta_star_from(bad, 1.0, 1.0, 0.1, 0.1, 1),
            Err(ConfsetError::InvalidCovering(_))
        ));
    }

    #[test]
    fn tracker_is_nondecreasing() {
        for schedule in [BetaSchedule::Episode, BetaSchedule::Horizon] {
            let mut tracker = BetaTracker::new(FunctionClass::tabular_rewards(12, 1.0, 0.5), schedule, 0.05, 10_000);
            let mut last = 0.0;
            for k in 1..=1000 {
                let b = tracker.advance(k, (k - 1) * 10 + 1).unwrap();
                assert!(b >= last);
                last = b;
            }
        }
    }
}
