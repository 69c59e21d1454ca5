use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Truncation point, in standard deviations, of [`Noise::TruncatedGaussian`].
pub const TRUNCATION_SIGMAS: f64 = 4.0;

/// Additive observation noise law.
///
/// Both Gaussian variants are `sigma`-sub-Gaussian. The truncated variant is
/// bounded by `4 sigma` and is treated as `sigma`-sub-Gaussian without any
/// adjustment, which is conservative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    #[default]
    None,
    Gaussian {
        sigma: f64,
    },
    TruncatedGaussian {
        sigma: f64,
    },
}

impl Noise {
    /// Sub-Gaussian scale parameter.
    pub fn sigma(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } | Noise::TruncatedGaussian { sigma } => sigma,
        }
    }

    /// Exact variance of one component.
    pub fn variance(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma * sigma,
            Noise::TruncatedGaussian { sigma } => {
                let c = TRUNCATION_SIGMAS;
                let pdf = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = statrs::function::erf::erf(c / std::f64::consts::SQRT_2);
                sigma * sigma * (1.0 - 2.0 * c * pdf / mass)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            Noise::TruncatedGaussian { sigma } => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= TRUNCATION_SIGMAS {
                    break sigma * z;
                }
            },
        }
    }

    pub fn sample_vector<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.sample(rng))
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Noise::None => Ok(()),
            Noise::Gaussian { sigma } | Noise::TruncatedGaussian { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(format!("noise scale must be positive, got {sigma}"))
                }
            }
        }
    }
}

/// Euclidean projection onto the ball of radius `radius`.
pub fn project_ball(x: &DVector<f64>, radius: f64) -> DVector<f64> {
    assert!(radius > 0.0, "projection radius must be positive");
    let norm = x.norm();
    if norm <= radius {
        x.clone()
    } else {
        x * (radius / norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inside_point_is_unchanged() {
        let x = DVector::from_vec(vec![0.3, 0.4]);
        assert_eq!(project_ball(&x, 1.0), x);
    }

    #[test]
    fn three_four_five() {
        let p = project_ball(&DVector::from_vec(vec![3.0, 4.0]), 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn thousand_random_projections_lie_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x = Noise::Gaussian { sigma: 10.0 }.sample_vector(4, &mut rng);
            assert!(project_ball(&x, 2.5).norm() <= 2.5 * (1.0 + 1e-15));
        }
    }

    #[test]
    fn truncated_noise_is_bounded_with_matching_variance() {
        let noise = Noise::TruncatedGaussian { sigma: 2.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..200_000).map(|_| noise.sample(&mut rng)).collect();
        assert!(xs.iter().all(|x| x.abs() <= 8.0));
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((var - noise.variance()).abs() < 0.03, "{var} vs {}", noise.variance());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(v in proptest::collection::vec(-50.0f64..50.0, 1..6), r in 0.1f64..10.0) {
            let x = DVector::from_vec(v);
            let p = project_ball(&x, r);
            prop_assert!(p.norm() <= r * (1.0 + 1e-12));
            let pp = project_ball(&p, r);
            prop_assert!((pp - &p).norm() <= 1e-12 * r);
        }
    }
}
