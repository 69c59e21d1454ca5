use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MdpPosterior, TabularPosterior};
use crate::environments::TabularMdp;
use crate::mdp::EpisodicMdp;
use crate::stats::ks_two_sample;

/// Outcome of comparing `g(M*)` with `g(M_k)` across independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub n_runs: usize,
    pub ks_statistic: f64,
    pub p_value: f64,
    /// Both samples had zero variance, so the test carries no information.
    pub inconclusive: bool,
    pub true_mean: f64,
    pub sampled_mean: f64,
}

impl MatchingReport {
    pub fn passes(&self, level: f64) -> bool {
        self.inconclusive || self.p_value > level
    }
}

fn has_spread(xs: &[f64]) -> bool {
    xs.iter().any(|x| *x != xs[0])
}

/// Draws `M* ~ truth_prior`, builds a history on `M*` that updates a copy of
/// `agent_prior`, then draws `M_k` from the resulting posterior. Repeats
/// `n_runs` times with independent generator streams and compares the
/// distributions of `g(M*)` and `g(M_k)` with a two-sample KS test.
///
/// When `agent_prior == truth_prior` the two distributions coincide.
pub fn posterior_matching_test<P, H, G>(
    truth_prior: &P,
    agent_prior: &P,
    history: H,
    g: G,
    n_runs: usize,
    seed: u64,
) -> MatchingReport
where
    P: MdpPosterior + Clone + Sync,
    H: Fn(&P::Mdp, &mut P, &mut ChaCha8Rng) + Sync,
    G: Fn(&P::Mdp) -> f64 + Sync,
{
    assert!(n_runs > 0, "matching test needs at least one run");
    let pairs: Vec<(f64, f64)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let truth = truth_prior.sample_mdp(&mut rng);
            let mut post = agent_prior.clone();
            history(&truth, &mut post, &mut rng);
            let sampled = post.sample_mdp(&mut rng);
            (g(&truth), g(&sampled))
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let inconclusive = !has_spread(&a) && !has_spread(&b);
    let ks = ks_two_sample(&a, &b);
    MatchingReport {
        n_runs,
        ks_statistic: ks.statistic,
        p_value: if inconclusive { 1.0 } else { ks.p_value },
        inconclusive,
        true_mean: a.iter().sum::<f64>() / n_runs as f64,
        sampled_mean: b.iter().sum::<f64>() / n_runs as f64,
    }
}

/// History generator for tabular posteriors: `episodes` episodes of
/// uniformly random actions on `M*`, observed with reward noise `sigma_r`.
pub fn random_policy_history(
    episodes: usize,
    sigma_r: f64,
) -> impl Fn(&TabularMdp, &mut TabularPosterior, &mut ChaCha8Rng) + Sync {
    move |truth, post, rng| {
        let noise = crate::environments::Noise::Gaussian { sigma: sigma_r };
        for _ in 0..episodes {
            let mut s = truth.sample_initial(rng);
            for _ in 0..truth.horizon() {
                let a = rng.random_range(0..truth.n_actions());
                let (r, next) = truth.sample_step(&s, &a, rng);
                post.observe(&s, &a, r + noise.sample(rng), &next)
                    .expect("history matches posterior dimensions");
                s = next;
            }
        }
    }
}
