use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PosteriorError;

/// Ridge `(eps / (2 C_theta))^2` matching the regularizer of the confidence-set analysis.
pub fn default_ridge(eps: f64, theta_bound: f64) -> f64 {
    (eps / (2.0 * theta_bound)).powi(2)
}

/// Matrix-normal posterior for `y = theta phi + noise` with known noise scale.
///
/// With prior rows `theta_j ~ N(0, sigma^2 V_0^{-1})` the posterior is
/// `theta ~ MN(M, I, sigma^2 V^{-1})` where `V = V_0 + sum phi phi^T` and
/// `M = (sum y phi^T) V^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDynamicsPosterior {
    sigma: f64,
    precision: DMatrix<f64>,
    cross: DMatrix<f64>,
    count: usize,
}

impl LinearDynamicsPosterior {
    /// `out_dim x feature_dim` parameter with prior precision `ridge * I`.
    pub fn new(out_dim: usize, feature_dim: usize, sigma: f64, ridge: f64) -> Result<Self, PosteriorError> {
        if !(sigma > 0.0) || !(ridge > 0.0) {
            return Err(PosteriorError::InvalidPrior(format!(
                "noise scale {sigma} and ridge {ridge} must be positive"
            )));
        }
        Ok(Self {
            sigma,
            precision: DMatrix::identity(feature_dim, feature_dim) * ridge,
            cross: DMatrix::zeros(out_dim, feature_dim),
            count: 0,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.cross.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.cross.ncols()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn update(&mut self, phi: &DVector<f64>, y: &DVector<f64>) -> Result<(), PosteriorError> {
        if phi.len() != self.feature_dim() {
            return Err(PosteriorError::DimensionMismatch {
                expected: self.feature_dim(),
                actual: phi.len(),
            });
        }
        if y.len() != self.out_dim() {
            return Err(PosteriorError::DimensionMismatch {
                expected: self.out_dim(),
                actual: y.len(),
            });
        }
        self.precision += phi * phi.transpose();
        self.cross += y * phi.transpose();
        self.count += 1;
        Ok(())
    }

    fn cholesky(&self) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        self.precision
            .clone()
            .cholesky()
            .expect("precision is positive definite")
    }

    /// Posterior mean, equal to the ridge-regularized least-squares solution.
    pub fn mean(&self) -> DMatrix<f64> {
        self.cholesky().solve(&self.cross.transpose()).transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let chol = self.cholesky();
        let z = DMatrix::from_fn(self.out_dim(), self.feature_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        // Rows of Z L^{-T} have covariance (L L^T)^{-1} = V^{-1}.
        let w = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z.transpose())
            .expect("triangular factor is nonsingular");
        self.mean() + w.transpose() * self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_observations_recover_parameter() {
        let theta = DMatrix::from_row_slice(2, 3, &[0.5, -0.2, 0.1, 0.3, 0.8, -0.6]);
        let mut post = LinearDynamicsPosterior::new(2, 3, 0.1, 1e-12).unwrap();
        let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]];
        for b in basis {
            let phi = DVector::from_row_slice(&b);
            post.update(&phi, &(&theta * &phi)).unwrap();
        }
        assert!((post.mean() - &theta).amax() < 1e-8);
    }

    #[test]
    fn mean_is_ridge_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ridge = 0.3;
        let mut post = LinearDynamicsPosterior::new(2, 2, 1.0, ridge).unwrap();
        let mut phis = vec![];
        let mut ys = vec![];
        for _ in 0..20 {
            let phi = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            post.update(&phi, &y).unwrap();
            phis.push(phi);
            ys.push(y);
        }
        // Ridge objective gradient vanishes at the mean.
        let m = post.mean();
        let mut grad = &m * ridge;
        for (phi, y) in phis.iter().zip(&ys) {
            grad += (&m * phi - y) * phi.transpose();
        }
        assert!(grad.amax() < 1e-10);
    }

    #[test]
    fn sample_covariance_matches_posterior() {
        let mut post = LinearDynamicsPosterior::new(1, 2, 0.5, 1.0).unwrap();
        post.update(&DVector::from_vec(vec![1.0, 1.0]), &DVector::from_vec(vec![0.4])).unwrap();
        post.update(&DVector::from_vec(vec![2.0, 0.0]), &DVector::from_vec(vec![1.0])).unwrap();
        let cov = post.precision().clone().try_inverse().unwrap() * 0.25;
        let mean = post.mean();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let d = (post.sample(&mut rng) - &mean).transpose();
            acc += &d * d.transpose();
        }
        acc /= n as f64;
        assert!((acc - &cov).amax() < 0.03 * cov.amax(), "{cov}");
    }

    #[test]
    fn rejects_wrong_dimensions() {
        let mut post = LinearDynamicsPosterior::new(2, 3, 1.0, 1.0).unwrap();
        assert!(post.update(&DVector::zeros(2), &DVector::zeros(2)).is_err());
        assert!(post.update(&DVector::zeros(3), &DVector::zeros(1)).is_err());
    }

    #[test]
    fn default_ridge_formula() {
        assert!((default_ridge(0.5, 2.0) - 0.015625).abs() < 1e-15);
    }
}
