use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{project_ball, Noise};
use crate::mdp::{EpisodicMdp, MdpError};

/// Number of grid points used to verify link derivatives at construction.
pub const LINK_GRID_POINTS: usize = 10_000;

const GRID_HALF_WIDTH: f64 = 20.0;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;

/// Component-wise link `g(z) = h_low z + 4 (h_high - h_low) (sigmoid(z) - 1/2)`.
///
/// The logistic slope peaks at 1/4, so `g'` ranges over `[h_low, h_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmLink {
    pub h_low: f64,
    pub h_high: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl GlmLink {
    pub fn new(h_low: f64, h_high: f64) -> Result<Self, MdpError> {
        let link = Self { h_low, h_high };
        link.verify()?;
        Ok(link)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.h_low * z + 4.0 * (self.h_high - self.h_low) * (sigmoid(z) - 0.5)
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let s = sigmoid(z);
        self.h_low + 4.0 * (self.h_high - self.h_low) * s * (1.0 - s)
    }

    /// Condition number `h_high / h_low`.
    pub fn condition_number(&self) -> f64 {
        self.h_high / self.h_low
    }

    /// Central finite differences on an evenly spaced grid over `[-20, 20]`.
    /// Returns the smallest and largest observed slope.
    pub fn grid_derivative_range(&self, points: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..points {
            let z = -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * i as f64 / (points - 1) as f64;
            let d = (self.eval(z + FD_STEP) - self.eval(z - FD_STEP)) / (2.0 * FD_STEP);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }

    fn verify(&self) -> Result<(), MdpError> {
        if !(self.h_low > 0.0) || !(self.h_high >= self.h_low) || !self.h_high.is_finite() {
            return Err(MdpError::InvalidModel(format!(
                "link bounds must satisfy 0 < h_low <= h_high, got [{}, {}]",
                self.h_low, self.h_high
            )));
        }
        let (lo, hi) = self.grid_derivative_range(LINK_GRID_POINTS);
        if lo < self.h_low * (1.0 - FD_REL_TOL) || hi > self.h_high * (1.0 + FD_REL_TOL) {
            return Err(MdpError::InvalidModel(format!(
                "link slope range [{lo}, {hi}] exceeds [{}, {}]",
                self.h_low, self.h_high
            )));
        }
        Ok(())
    }
}

/// Generalized-linear dynamics on a ball of radius `radius`.
///
/// Features are `phi(s, a) = (s, e_a)` for a finite action set. The next
/// state is `Pi_C(g(theta phi) + eps)` and the mean reward is `w . phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmMdp {
    link: GlmLink,
    theta: DMatrix<f64>,
    reward_weights: DVector<f64>,
    n_actions: usize,
    theta_bound: f64,
    noise: Noise,
    radius: f64,
    horizon: usize,
    initial_state: DVector<f64>,
}

impl GlmMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        link: GlmLink,
        theta: DMatrix<f64>,
        reward_weights: DVector<f64>,
        n_actions: usize,
        theta_bound: f64,
        noise: Noise,
        radius: f64,
        horizon: usize,
        initial_state: DVector<f64>,
    ) -> Result<Self, MdpError> {
        link.verify()?;
        let n = theta.nrows();
        if n_actions == 0 || horizon == 0 || !(radius > 0.0) {
            return Err(MdpError::InvalidModel(
                "actions, horizon and radius must be positive".into(),
            ));
        }
        if theta.ncols() != n + n_actions {
            return Err(MdpError::DimensionMismatch {
                expected: n + n_actions,
                actual: theta.ncols(),
            });
        }
        if reward_weights.len() != n + n_actions {
            return Err(MdpError::DimensionMismatch {
                expected: n + n_actions,
                actual: reward_weights.len(),
            });
        }
        if initial_state.len() != n {
            return Err(MdpError::DimensionMismatch {
                expected: n,
                actual: initial_state.len(),
            });
        }
        let norm = theta.clone().svd(false, false).singular_values.max();
        if norm > theta_bound * (1.0 + 1e-12) {
            return Err(MdpError::InvalidModel(format!(
                "parameter norm {norm} exceeds bound {theta_bound}"
            )));
        }
        noise.validate().map_err(MdpError::InvalidModel)?;
        Ok(Self {
            link,
            theta,
            reward_weights,
            n_actions,
            theta_bound,
            noise,
            radius,
            horizon,
            initial_state: project_ball(&initial_state, radius),
        })
    }

    /// A small deterministic instance with `n`-dimensional state.
    pub fn example(n: usize, n_actions: usize) -> Self {
        let p = n + n_actions;
        let theta = DMatrix::from_fn(n, p, |i, j| {
            let v = ((i * p + j) as f64 * 0.7).sin();
            0.5 * v / (p as f64).sqrt()
        });
        let bound = theta.clone().svd(false, false).singular_values.max();
        let weights = DVector::from_fn(p, |j, _| if j < n { 0.0 } else { j as f64 / p as f64 });
        Self::new(
            GlmLink::new(0.5, 1.0).expect("valid link"),
            theta,
            weights,
            n_actions,
            bound,
            Noise::Gaussian { sigma: 0.1 },
            1.0,
            5,
            DVector::zeros(n),
        )
        .expect("example parameters are valid")
    }

    pub fn link(&self) -> GlmLink {
        self.link
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn theta_bound(&self) -> f64 {
        self.theta_bound
    }

    pub fn state_dim(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Feature bound `C_phi` implied by the state radius and one-hot action.
    pub fn feature_bound(&self) -> f64 {
        (self.radius * self.radius + 1.0).sqrt()
    }

    pub fn features(&self, s: &DVector<f64>, a: usize) -> DVector<f64> {
        let n = self.state_dim();
        let mut phi = DVector::zeros(n + self.n_actions);
        phi.rows_mut(0, n).copy_from(s);
        phi[n + a] = 1.0;
        phi
    }

    pub fn mean_next_state(&self, s: &DVector<f64>, a: usize) -> DVector<f64> {
        (&self.theta * self.features(s, a)).map(|z| self.link.eval(z))
    }
}

impl EpisodicMdp for GlmMdp {
    type State = DVector<f64>;
    type Action = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _: &mut R) -> DVector<f64> {
        self.initial_state.clone()
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

    fn mean_reward(&self, state: &DVector<f64>, action: &usize) -> f64 {
        self.reward_weights.dot(&self.features(state, *action))
    }

    fn sample_step<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        action: &usize,
        rng: &mut R,
    ) -> (f64, DVector<f64>) {
        let reward = self.mean_reward(state, action);
        let next = self.mean_next_state(state, *action)
            + self.noise.sample_vector(self.state_dim(), rng);
        (reward, project_ball(&next, self.radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn link_derivative_stays_in_bounds_on_grid() {
        for (lo, hi) in [(0.5, 1.0), (1.0, 1.0), (0.1, 3.0), (0.01, 0.02)] {
            let link = GlmLink::new(lo, hi).unwrap();
            let (a, b) = link.grid_derivative_range(LINK_GRID_POINTS);
            assert!(a >= lo * (1.0 - 1e-6) && b <= hi * (1.0 + 1e-6));
            // The slope is attained near both ends of the range.
            assert!((b - hi).abs() < 1e-3 * hi);
            assert!((a - lo).abs() < 1e-3 * hi);
            assert!(link.condition_number() >= 1.0);
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let link = GlmLink::new(0.3, 2.0).unwrap();
        for i in 0..200 {
            let z = -10.0 + 0.1 * i as f64;
            let fd = (link.eval(z + 1e-6) - link.eval(z - 1e-6)) / 2e-6;
            assert!((fd - link.derivative(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_invalid_bounds() {
        assert!(GlmLink::new(0.0, 1.0).is_err());
        assert!(GlmLink::new(2.0, 1.0).is_err());
    }

    #[test]
    fn states_stay_in_ball() {
        let mdp = GlmMdp::example(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = mdp.sample_initial(&mut rng);
        for i in 0..500 {
            let (_, next) = mdp.sample_step(&s, &(i % 2), &mut rng);
            assert!(next.norm() <= mdp.radius() * (1.0 + 1e-12));
            s = next;
        }
    }

    #[test]
    fn rejects_oversized_parameter() {
        let base = GlmMdp::example(2, 2);
        let err = GlmMdp::new(
            base.link(),
            base.theta() * 3.0,
            DVector::zeros(4),
            2,
            base.theta_bound(),
            Noise::None,
            1.0,
            2,
            DVector::zeros(2),
        );
        assert!(err.is_err());
    }
}
