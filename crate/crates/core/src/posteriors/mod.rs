//! Conjugate posteriors over MDP parameters and exact posterior sampling.

mod dirichlet;
mod gaussian;
mod linear;
mod matching;

pub use dirichlet::DirichletTransitionPosterior;
pub use gaussian::{sample_truncated_normal, GaussianRewardPosterior, RewardMarginal, RewardPrecision};
pub use linear::{default_ridge, LinearDynamicsPosterior};
pub use matching::{posterior_matching_test, random_policy_history, MatchingReport};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environments::{BoundedLqr, Noise, TabularMdp};
use crate::mdp::{InitialDistribution, MdpError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error(transparent)]
    Model(#[from] MdpError),
}

/// A posterior over a family of MDPs that can be updated with single
/// transitions and sampled exactly.
pub trait MdpPosterior {
    type Mdp;
    type State;
    type Action;

    fn sample_mdp<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Mdp;

    fn observe(
        &mut self,
        state: &Self::State,
        action: &Self::Action,
        reward: f64,
        next_state: &Self::State,
    ) -> Result<(), PosteriorError>;
}

/// Joint posterior for a tabular MDP: Dirichlet transitions and Gaussian rewards.
///
/// Sampled MDPs share the horizon and initial distribution of the template
/// and carry no observation noise (planning only uses their means).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPosterior {
    pub transitions: DirichletTransitionPosterior,
    pub rewards: GaussianRewardPosterior,
    horizon: usize,
    initial: InitialDistribution,
}

impl TabularPosterior {
    pub fn new(
        transitions: DirichletTransitionPosterior,
        rewards: GaussianRewardPosterior,
        horizon: usize,
        initial: InitialDistribution,
    ) -> Result<Self, PosteriorError> {
        let pairs = transitions.n_states() * transitions.n_actions();
        if rewards.n_pairs() != pairs {
            return Err(PosteriorError::DimensionMismatch {
                expected: pairs,
                actual: rewards.n_pairs(),
            });
        }
        initial.validate(transitions.n_states())?;
        if horizon == 0 {
            return Err(PosteriorError::InvalidPrior("horizon must be positive".into()));
        }
        Ok(Self {
            transitions,
            rewards,
            horizon,
            initial,
        })
    }

    /// Default prior: flat Dirichlet transitions and `N(0.5, 1)` rewards with
    /// known noise `sigma_r`, truncated to `[0, 1]`.
    pub fn default_prior(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        sigma_r: f64,
    ) -> Result<Self, PosteriorError> {
        Self::new(
            DirichletTransitionPosterior::symmetric(n_states, n_actions, 1.0)?,
            GaussianRewardPosterior::new(n_states * n_actions, 0.5, 1.0, RewardPrecision::Known { sigma: sigma_r })?
                .with_support(0.0, 1.0)?,
            horizon,
            InitialDistribution::Point(0),
        )
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &InitialDistribution {
        &self.initial
    }

    fn build(&self, rewards: Vec<f64>, transitions: Vec<f64>) -> TabularMdp {
        TabularMdp::new_unchecked(
            self.n_states(),
            self.n_actions(),
            self.horizon,
            rewards,
            transitions,
            Noise::None,
            self.initial.clone(),
        )
    }

    /// The MDP built from posterior means.
    pub fn mean_mdp(&self) -> TabularMdp {
        self.build(self.rewards.means(), self.transitions.mean_transitions())
    }
}

impl MdpPosterior for TabularPosterior {
    type Mdp = TabularMdp;
    type State = usize;
    type Action = usize;

    fn sample_mdp<R: Rng + ?Sized>(&self, rng: &mut R) -> TabularMdp {
        let transitions = self.transitions.sample_transitions(rng);
        let rewards = self.rewards.sample_all(rng);
        self.build(rewards, transitions)
    }

    fn observe(&mut self, s: &usize, a: &usize, r: f64, next: &usize) -> Result<(), PosteriorError> {
        self.transitions.update(*s, *a, *next)?;
        self.rewards.update(s * self.n_actions() + a, r)
    }
}

/// Posterior over the dynamics matrix of a bounded LQR with known costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrPosterior {
    pub dynamics: LinearDynamicsPosterior,
    template: BoundedLqr,
}

impl LqrPosterior {
    /// Prior `B_j ~ N(0, sigma^2 / ridge I)` row-wise, with `sigma` the
    /// template's transition noise scale.
    pub fn new(template: BoundedLqr, ridge: f64) -> Result<Self, PosteriorError> {
        let sigma = template.noise().sigma();
        let dims = template.dynamics().shape();
        Ok(Self {
            dynamics: LinearDynamicsPosterior::new(dims.0, dims.1, sigma, ridge)?,
            template,
        })
    }

    pub fn template(&self) -> &BoundedLqr {
        &self.template
    }

    pub fn mean_mdp(&self) -> BoundedLqr {
        self.template.with_dynamics(self.dynamics.mean())
    }
}

fn joint(s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(s.len() + a.len(), s.iter().chain(a.iter()).copied())
}

impl MdpPosterior for LqrPosterior {
    type Mdp = BoundedLqr;
    type State = DVector<f64>;
    type Action = DVector<f64>;

    fn sample_mdp<R: Rng + ?Sized>(&self, rng: &mut R) -> BoundedLqr {
        let b: DMatrix<f64> = self.dynamics.sample(rng);
        self.template.with_dynamics(b)
    }

    fn observe(
        &mut self,
        s: &DVector<f64>,
        a: &DVector<f64>,
        _reward: f64,
        next: &DVector<f64>,
    ) -> Result<(), PosteriorError> {
        self.dynamics.update(&joint(s, a), next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn repeated_seed_gives_identical_sample() {
        let post = TabularPosterior::default_prior(4, 2, 5, 0.5).unwrap();
        let a = post.sample_mdp(&mut ChaCha8Rng::seed_from_u64(11));
        let b = post.sample_mdp(&mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_mdp_is_valid() {
        let post = TabularPosterior::default_prior(4, 2, 5, 0.5).unwrap();
        let m = post.sample_mdp(&mut ChaCha8Rng::seed_from_u64(0));
        let checked = TabularMdp::new(
            4,
            2,
            5,
            m.rewards().to_vec(),
            m.transitions().to_vec(),
            Noise::None,
            InitialDistribution::Point(0),
        );
        assert!(checked.is_ok());
        assert!(m.rewards().iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn json_round_trip() {
        let mut post = TabularPosterior::default_prior(3, 2, 4, 0.5).unwrap();
        post.observe(&0, &1, 0.7, &2).unwrap();
        let text = serde_json::to_string(&post).unwrap();
        let back: TabularPosterior = serde_json::from_str(&text).unwrap();
        assert_eq!(post, back);

        let lqr = BoundedLqr::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            1,
            Noise::Gaussian { sigma: 0.1 },
            1.0,
            3,
            DVector::zeros(1),
        )
        .unwrap();
        let lp = LqrPosterior::new(lqr, 1.0).unwrap();
        let back: LqrPosterior = serde_json::from_str(&serde_json::to_string(&lp).unwrap()).unwrap();
        assert_eq!(lp, back);
    }

    #[test]
    fn lqr_posterior_concentrates_on_truth() {
        let truth = DMatrix::from_row_slice(2, 3, &[0.8, 0.1, 0.5, -0.3, 0.9, 0.2]);
        let lqr = BoundedLqr::new(
            truth.clone(),
            DMatrix::identity(3, 3),
            2,
            Noise::Gaussian { sigma: 0.1 },
            10.0,
            5,
            DVector::zeros(2),
        )
        .unwrap();
        let mut post = LqrPosterior::new(lqr.clone(), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use crate::mdp::EpisodicMdp;
        for _ in 0..2000 {
            let s = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let a = DVector::from_fn(1, |_, _| rng.random_range(-1.0..1.0));
            let (r, next) = lqr.sample_step(&s, &a, &mut rng);
            post.observe(&s, &a, r, &next).unwrap();
        }
        assert!((post.mean_mdp().dynamics() - &truth).amax() < 0.03);
        assert!((post.sample_mdp(&mut rng).dynamics() - &truth).amax() < 0.05);
    }
}
