use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::PosteriorError;

/// Observation-noise model for the reward posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RewardPrecision {
    /// Known noise scale: Normal prior `N(mean, variance)` on the mean reward.
    Known { sigma: f64 },
    /// Unknown precision: Normal-Gamma prior with `lambda ~ Gamma(shape, rate)`
    /// and `mu | lambda ~ N(mean, variance / lambda)`.
    Unknown { shape: f64, rate: f64 },
}

/// Per-pair Gaussian posterior over mean rewards.
///
/// Sufficient statistics are the count, sum and sum of squares of observed
/// rewards for every pair. With known precision an optional support
/// `[lo, hi]` truncates the prior (and hence the posterior) to that interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRewardPosterior {
    prior_mean: f64,
    prior_variance: f64,
    precision: RewardPrecision,
    support: Option<(f64, f64)>,
    counts: Vec<f64>,
    sums: Vec<f64>,
    sum_squares: Vec<f64>,
}

/// Marginal posterior of one pair's mean reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardMarginal {
    /// Mean of the untruncated Gaussian (Student-t location if precision is unknown).
    pub location: f64,
    /// Variance of the untruncated Gaussian (scale squared if precision is unknown).
    pub variance: f64,
}

impl GaussianRewardPosterior {
    pub fn new(
        n_pairs: usize,
        prior_mean: f64,
        prior_variance: f64,
        precision: RewardPrecision,
    ) -> Result<Self, PosteriorError> {
        if !(prior_variance > 0.0) || !prior_mean.is_finite() {
            return Err(PosteriorError::InvalidPrior(format!(
                "prior N({prior_mean}, {prior_variance}) is not proper"
            )));
        }
        match precision {
            RewardPrecision::Known { sigma } if !(sigma > 0.0) => {
                return Err(PosteriorError::InvalidPrior(format!(
                    "noise scale must be positive, got {sigma}"
                )))
            }
            RewardPrecision::Unknown { shape, rate } if !(shape > 0.0 && rate > 0.0) => {
                return Err(PosteriorError::InvalidPrior(format!(
                    "Gamma({shape}, {rate}) is not proper"
                )))
            }
            _ => {}
        }
        Ok(Self {
            prior_mean,
            prior_variance,
            precision,
            support: None,
            counts: vec![0.0; n_pairs],
            sums: vec![0.0; n_pairs],
            sum_squares: vec![0.0; n_pairs],
        })
    }

    /// Restricts the mean reward to `[lo, hi]` (known precision only).
    pub fn with_support(mut self, lo: f64, hi: f64) -> Result<Self, PosteriorError> {
        if !(lo < hi) {
            return Err(PosteriorError::InvalidPrior(format!("empty support [{lo}, {hi}]")));
        }
        if matches!(self.precision, RewardPrecision::Unknown { .. }) {
            return Err(PosteriorError::InvalidPrior(
                "truncated support requires known precision".into(),
            ));
        }
        self.support = Some((lo, hi));
        Ok(self)
    }

    pub fn n_pairs(&self) -> usize {
        self.counts.len()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    pub fn count(&self, pair: usize) -> f64 {
        self.counts[pair]
    }

    pub fn update(&mut self, pair: usize, reward: f64) -> Result<(), PosteriorError> {
        if pair >= self.counts.len() {
            return Err(PosteriorError::DimensionMismatch {
                expected: self.counts.len(),
                actual: pair,
            });
        }
        self.counts[pair] += 1.0;
        self.sums[pair] += reward;
        self.sum_squares[pair] += reward * reward;
        Ok(())
    }

    /// Untruncated marginal for `pair`.
    pub fn marginal(&self, pair: usize) -> RewardMarginal {
        let n = self.counts[pair];
        match self.precision {
            RewardPrecision::Known { sigma } => {
                let noise_var = sigma * sigma;
                let prec = 1.0 / self.prior_variance + n / noise_var;
                let location = (self.prior_mean / self.prior_variance + self.sums[pair] / noise_var) / prec;
                RewardMarginal {
                    location,
                    variance: 1.0 / prec,
                }
            }
            RewardPrecision::Unknown { .. } => {
                let (mu, kappa, shape, rate) = self.normal_gamma(pair);
                RewardMarginal {
                    location: mu,
                    variance: rate / (shape * kappa),
                }
            }
        }
    }

    /// Normal-Gamma posterior `(mu_n, kappa_n, a_n, b_n)`.
    fn normal_gamma(&self, pair: usize) -> (f64, f64, f64, f64) {
        let RewardPrecision::Unknown { shape, rate } = self.precision else {
            unreachable!("normal_gamma called with known precision")
        };
        let n = self.counts[pair];
        let kappa0 = 1.0 / self.prior_variance;
        let kappa = kappa0 + n;
        let mu = (kappa0 * self.prior_mean + self.sums[pair]) / kappa;
        let (mean, ss) = if n > 0.0 {
            let m = self.sums[pair] / n;
            (m, (self.sum_squares[pair] - n * m * m).max(0.0))
        } else {
            (0.0, 0.0)
        };
        let rate_n = rate + 0.5 * ss + kappa0 * n * (mean - self.prior_mean).powi(2) / (2.0 * kappa);
        (mu, kappa, shape + 0.5 * n, rate_n)
    }

    /// Posterior mean of the (possibly truncated) mean reward.
    pub fn mean(&self, pair: usize) -> f64 {
        let m = self.marginal(pair);
        match self.support {
            None => m.location,
            Some((lo, hi)) => truncated_normal_mean(m.location, m.variance.sqrt(), lo, hi),
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n_pairs()).map(|x| self.mean(x)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, pair: usize, rng: &mut R) -> f64 {
        match self.precision {
            RewardPrecision::Known { .. } => {
                let m = self.marginal(pair);
                match self.support {
                    None => m.location + m.variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
                    Some((lo, hi)) => sample_truncated_normal(m.location, m.variance.sqrt(), lo, hi, rng),
                }
            }
            RewardPrecision::Unknown { .. } => {
                let (mu, kappa, shape, rate) = self.normal_gamma(pair);
                let lambda = Gamma::new(shape, 1.0 / rate).expect("proper Gamma").sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                mu + z / (kappa * lambda).sqrt()
            }
        }
    }

    pub fn sample_all<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n_pairs()).map(|x| self.sample(x, rng)).collect()
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn truncated_normal_mean(mu: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let n = std_normal();
    let (a, b) = ((lo - mu) / sd, (hi - mu) / sd);
    let mass = n.cdf(b) - n.cdf(a);
    if mass < 1e-300 {
        return mu.clamp(lo, hi);
    }
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (mu + sd * (pdf(a) - pdf(b)) / mass).clamp(lo, hi)
}

/// Inverse-CDF sampling of `N(mu, sd^2)` restricted to `[lo, hi]`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mu: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let n = std_normal();
    let (mut a, mut b) = ((lo - mu) / sd, (hi - mu) / sd);
    // Work in the lower tail where the CDF has full relative precision.
    let flip = a > 0.0;
    if flip {
        (a, b) = (-b, -a);
    }
    let (fa, fb) = (n.cdf(a), n.cdf(b));
    let u: f64 = rng.random();
    let z = if fb - fa > 0.0 {
        n.inverse_cdf(fa + u * (fb - fa)).clamp(a, b)
    } else {
        // No representable mass between the endpoints: use the nearer one.
        b
    };
    let z = if flip { -z } else { z };
    (mu + sd * z).clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_variance_conjugate_update() {
        let mut post = GaussianRewardPosterior::new(1, 0.0, 1.0, RewardPrecision::Known { sigma: 1.0 }).unwrap();
        post.update(0, 2.0).unwrap();
        let m = post.marginal(0);
        assert!((m.location - 1.0).abs() < 1e-15);
        assert!((m.variance - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_observations_leave_prior_unchanged() {
        let post = GaussianRewardPosterior::new(3, 0.5, 1.0, RewardPrecision::Known { sigma: 0.3 }).unwrap();
        let m = post.marginal(2);
        assert_eq!((m.location, m.variance), (0.5, 1.0));
    }

    #[test]
    fn batch_order_does_not_matter() {
        let obs = [0.3, -1.2, 2.5, 0.7, 0.7, 1.9];
        let prec = RewardPrecision::Unknown { shape: 2.0, rate: 1.0 };
        let mut a = GaussianRewardPosterior::new(1, 0.0, 1.0, prec).unwrap();
        let mut b = a.clone();
        for r in obs {
            a.update(0, r).unwrap();
        }
        for r in [1.9, 0.7, 2.5, 0.3, 0.7, -1.2] {
            b.update(0, r).unwrap();
        }
        let (ma, mb) = (a.marginal(0), b.marginal(0));
        assert!((ma.location - mb.location).abs() < 1e-12);
        assert!((ma.variance - mb.variance).abs() < 1e-12);
    }

    #[test]
    fn unknown_precision_samples_match_student_t_moments() {
        // Marginal of mu is Student-t with 2 a_n degrees of freedom.
        let prec = RewardPrecision::Unknown { shape: 3.0, rate: 2.0 };
        let mut post = GaussianRewardPosterior::new(1, 0.0, 4.0, prec).unwrap();
        for r in [1.0, 2.0, 0.5, 1.5] {
            post.update(0, r).unwrap();
        }
        let m = post.marginal(0);
        let dof = 2.0 * (3.0 + 2.0);
        let var = m.variance * dof / (dof - 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| post.sample(0, &mut rng)).collect();
        let (mean, se) = crate::stats::mean_and_stderr(&xs);
        assert!((mean - m.location).abs() < 4.0 * se);
        let emp_var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((emp_var - var).abs() < 0.02 * var, "{emp_var} vs {var}");
    }

    #[test]
    fn truncated_samples_respect_support_and_mean() {
        let post = GaussianRewardPosterior::new(1, 0.5, 1.0, RewardPrecision::Known { sigma: 1.0 })
            .unwrap()
            .with_support(0.0, 1.0)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| post.sample(0, &mut rng)).collect();
        assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
        let (mean, se) = crate::stats::mean_and_stderr(&xs);
        assert!((mean - post.mean(0)).abs() < 4.0 * se);
        assert!((post.mean(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn far_tail_truncation_stays_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = sample_truncated_normal(-50.0, 0.1, 0.0, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&x));
            let y = sample_truncated_normal(50.0, 0.1, 0.0, 1.0, &mut rng);
            assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn unknown_precision_rejects_support() {
        let post = GaussianRewardPosterior::new(1, 0.0, 1.0, RewardPrecision::Unknown { shape: 1.0, rate: 1.0 }).unwrap();
        assert!(post.with_support(0.0, 1.0).is_err());
    }

    #[test]
    fn posterior_sd_shrinks_like_inverse_root_n() {
        let sigma = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut post = GaussianRewardPosterior::new(1, 0.0, 1.0, RewardPrecision::Known { sigma }).unwrap();
        let grid = [100usize, 1_000, 10_000, 100_000];
        let mut xs = vec![];
        let mut ys = vec![];
        let mut seen = 0;
        for &n in &grid {
            while seen < n {
                post.update(0, 0.3 + sigma * rng.sample::<f64, _>(StandardNormal)).unwrap();
                seen += 1;
            }
            xs.push((n as f64).ln());
            ys.push(post.marginal(0).variance.sqrt().ln());
        }
        let fit = crate::stats::fit_line(&xs, &ys, 0.95).unwrap();
        assert!((-0.6..=-0.4).contains(&fit.slope), "slope {}", fit.slope);
    }
}
