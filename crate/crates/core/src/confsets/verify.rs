use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{beta_star, ConfsetError, FiniteClass, FiniteConfidenceSet, FunctionClass};
use crate::stats::binomial_stderr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthCountReport {
    pub eps: f64,
    pub count: usize,
    pub bound: f64,
    pub holds: bool,
}

/// Checks `#{w > eps} <= (4 beta_T / eps^2 + tau) d_E`.
pub fn verify_width_count(widths: &[f64], beta_t: f64, eps: f64, tau: usize, d_e: f64) -> WidthCountReport {
    let count = widths.iter().filter(|&&w| w > eps).count();
    let bound = (4.0 * beta_t / (eps * eps) + tau as f64) * d_e;
    WidthCountReport {
        eps,
        count,
        bound,
        holds: count as f64 <= bound,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthSumReport {
    pub steps: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `sum w <= 1 + tau C d_E + 4 sqrt(beta_T d_E T)` with `T` the number of widths.
pub fn verify_width_sum(widths: &[f64], beta_t: f64, c: f64, tau: usize, d_e: f64) -> WidthSumReport {
    let steps = widths.len();
    let lhs: f64 = widths.iter().sum();
    let rhs = 1.0 + tau as f64 * c * d_e + 4.0 * (beta_t * d_e * steps as f64).sqrt();
    WidthSumReport {
        steps,
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_runs: usize,
    pub covered: usize,
    pub frequency: f64,
    /// `1 - 2 delta` minus three binomial standard errors at that rate.
    pub threshold: f64,
    pub passed: bool,
}

/// Settings of a coverage experiment on a finite class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageSettings {
    pub truth: usize,
    pub noise_sigma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub horizon: usize,
    pub n_runs: usize,
    pub seed: u64,
    /// Multiplier on `beta*` (1 for the plain radius).
    pub beta_scale: f64,
}

/// Fraction of independent data streams for which `f*` stays inside
/// `F_t(beta*_t)` for every `t <= horizon`.
///
/// Inputs are drawn uniformly from the class domain and observations are
/// `f*(x) + N(0, noise_sigma^2 I)`.
pub fn verify_coverage(class: &FiniteClass, s: CoverageSettings) -> Result<CoverageReport, ConfsetError> {
    if s.truth >= class.len() {
        return Err(ConfsetError::InvalidArgument(format!("no member {}", s.truth)));
    }
    let wrapped = FunctionClass::Finite(class.clone());
    let betas: Vec<f64> = (1..=s.horizon)
        .map(|t| beta_star(&wrapped, s.delta, s.alpha, t).map(|b| b * s.beta_scale))
        .collect::<Result<_, _>>()?;
    let covered = (0..s.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(run as u64);
            let mut set = FiniteConfidenceSet::new(class.clone());
            let mut y = vec![0.0; class.out_dim];
            for beta in &betas {
                let x = rng.random_range(0..class.n_points);
                for (j, v) in y.iter_mut().enumerate() {
                    *v = class.value(s.truth, x)[j] + s.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
                set.observe(x, &y).expect("input in domain");
                set.set_beta(*beta);
                if !set.contains(s.truth) {
                    return false;
                }
            }
            true
        })
        .filter(|c| *c)
        .count();
    let target = 1.0 - 2.0 * s.delta;
    let threshold = target - 3.0 * binomial_stderr(target, s.n_runs);
    let frequency = covered as f64 / s.n_runs as f64;
    Ok(CoverageReport {
        n_runs: s.n_runs,
        covered,
        frequency,
        threshold,
        passed: frequency >= threshold,
    })
}

/// Eight scalar members on four points: the truth (member 0) and seven
/// perturbations of increasing size, so that shrinking the radius lets close
/// alternatives push the truth out of the set.
pub fn coverage_test_class(sigma: f64) -> FiniteClass {
    let pattern: [f64; 4] = [1.0, -1.0, 0.5, -0.5];
    let offsets: [f64; 8] = [0.0, 0.04, 0.08, 0.12, 0.18, 0.25, 0.4, 0.6];
    let members = offsets
        .iter()
        .map(|d| pattern.iter().map(|p| 0.2 * p + d * p.signum()).collect())
        .collect();
    FiniteClass::new(4, 1, members, 1.0, sigma).expect("valid coverage class")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_small_widths_count_zero() {
        let r = verify_width_count(&[0.01; 100], 1.0, 0.1, 5, 4.0);
        assert_eq!(r.count, 0);
        assert!(r.holds);
    }

    #[test]
    fn repeated_input_saturates_count() {
        // One pair observed repeatedly: width 2 sqrt(beta / n) exceeds eps
        // while n < 4 beta / eps^2, and the first episode adds tau more.
        let (beta, eps, tau) = (1.0, 0.5, 4usize);
        let mut widths = vec![];
        for k in 0..50 {
            let n = k * tau;
            for _ in 0..tau {
                widths.push(if n == 0 { 2.0 } else { (2.0 * (beta / n as f64).sqrt()).min(2.0) });
            }
        }
        let r = verify_width_count(&widths, beta, eps, tau, 1.0);
        // n < 16 at episode starts 0, 4, 8, 12: four episodes of four steps.
        assert_eq!(r.count, 16);
        assert!(r.count as f64 <= r.bound);
    }

    #[test]
    fn single_small_width_sum_holds() {
        let r = verify_width_sum(&[0.3], 1.0, 1.0, 1, 1.0);
        assert!(r.holds);
    }

    #[test]
    fn width_sum_is_permutation_invariant() {
        let w: Vec<f64> = (0..50).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut sorted = w.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let a = verify_width_sum(&w, 2.0, 1.0, 3, 2.0);
        let b = verify_width_sum(&sorted, 2.0, 1.0, 3, 2.0);
        assert_eq!(a.lhs.to_bits(), b.lhs.to_bits());
    }

    #[test]
    fn noiseless_coverage_is_exact() {
        let class = coverage_test_class(1.0);
        let r = verify_coverage(
            &class,
            CoverageSettings {
                truth: 0,
                noise_sigma: 0.0,
                delta: 0.05,
                alpha: 1e-6,
                horizon: 100,
                n_runs: 50,
                seed: 0,
                beta_scale: 1.0,
            },
        )
        .unwrap();
        assert_eq!(r.frequency, 1.0);
    }
}
