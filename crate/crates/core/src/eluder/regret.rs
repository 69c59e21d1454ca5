use serde::{Deserialize, Serialize};

use super::{analytic_eluder_bound, kolmogorov_surrogate, EluderError};
use crate::confsets::{covering_number, FunctionClass};

/// Constants of a bounded LQR problem for the `sigma C lambda_1 n^2 sqrt(T)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqrConstants {
    pub sigma: f64,
    /// State-norm bound.
    pub c: f64,
    /// Largest eigenvalue of the Riccati value matrix.
    pub lambda1: f64,
    pub n: usize,
}

/// The pieces of `D~(F)` for one class at horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTerms {
    pub kind: String,
    pub c: f64,
    pub sigma: f64,
    /// Eluder dimension bound at `eps = 1 / T`.
    pub d_e: f64,
    /// `ln N(F, 1 / T^2)`.
    pub log_covering: f64,
    /// `ln(8 N(F, 1 / T^2) T)`.
    pub n_f: f64,
    /// Analytic Kolmogorov dimension.
    pub d_k: f64,
    /// `tau C d_E`.
    pub episode_term: f64,
    /// `8 sqrt(d_E (4C + sqrt(2 sigma^2 ln(32 T^3))))`.
    pub concentration_term: f64,
    /// `8 sqrt(2 sigma^2 n_F d_E T)`.
    pub noise_term: f64,
    /// `1 + episode_term + concentration_term + noise_term`.
    pub d_tilde: f64,
}

/// Expected-regret bound for PSRL with every constant echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub total_steps: usize,
    pub tau: usize,
    /// `E[K*]`, the expected future-value Lipschitz constant.
    pub expected_lipschitz: f64,
    pub reward: ClassTerms,
    pub transition: ClassTerms,
    /// `1 + 1 / (T - 1)`.
    pub lipschitz_factor: f64,
    /// `C_R + C_P + D~(R) + E[K*] (1 + 1/(T - 1)) D~(P)`.
    pub total: f64,
    /// `sigma_R sqrt(d_K(R) d_E(R) T) + E[K*] sigma_P sqrt(d_K(P) d_E(P) T)`,
    /// without the hidden logarithmic factors and constants.
    pub kolmogorov_order: f64,
    /// `sigma C lambda_1 n^2 sqrt(T)` when LQR constants are supplied; the
    /// order form only, with unit constant.
    pub lqr_order: Option<f64>,
    pub lqr: Option<LqrConstants>,
}

fn class_terms(class: &FunctionClass, t: f64, tau: usize) -> Result<ClassTerms, EluderError> {
    let d_e = analytic_eluder_bound(class, 1.0 / t)?;
    let log_covering = covering_number(class, 1.0 / (t * t), None)?.log_value;
    let n_f = 8f64.ln() + log_covering + t.ln();
    let (c, sigma) = (class.c_bound(), class.sigma());
    let s2 = sigma * sigma;
    let episode_term = tau as f64 * c * d_e;
    let concentration_term = 8.0 * (d_e * (4.0 * c + (2.0 * s2 * (32.0 * t.powi(3)).ln()).sqrt())).sqrt();
    let noise_term = 8.0 * (2.0 * s2 * n_f * d_e * t).sqrt();
    Ok(ClassTerms {
        kind: class.kind().to_string(),
        c,
        sigma,
        d_e,
        log_covering,
        n_f,
        d_k: kolmogorov_surrogate(class),
        episode_term,
        concentration_term,
        noise_term,
        d_tilde: 1.0 + episode_term + concentration_term + noise_term,
    })
}

/// Expected regret bound of PSRL after `total_steps` steps with episode
/// length `tau`, reward class `reward`, transition class `transition` and
/// `E[K*] = expected_lipschitz`.
pub fn regret_bound(
    reward: &FunctionClass,
    transition: &FunctionClass,
    expected_lipschitz: f64,
    total_steps: usize,
    tau: usize,
    lqr: Option<LqrConstants>,
) -> Result<BoundReport, EluderError> {
    if total_steps <= 1 {
        return Err(EluderError::InvalidArgument(format!("T must exceed 1, got {total_steps}")));
    }
    if tau == 0 || !(expected_lipschitz >= 0.0) {
        return Err(EluderError::InvalidArgument(format!(
            "need tau >= 1 and E[K*] >= 0, got {tau}, {expected_lipschitz}"
        )));
    }
    let t = total_steps as f64;
    let r = class_terms(reward, t, tau)?;
    let p = class_terms(transition, t, tau)?;
    let lipschitz_factor = 1.0 + 1.0 / (t - 1.0);
    let total = r.c + p.c + r.d_tilde + expected_lipschitz * lipschitz_factor * p.d_tilde;
    let kolmogorov_order =
        r.sigma * (r.d_k * r.d_e * t).sqrt() + expected_lipschitz * p.sigma * (p.d_k * p.d_e * t).sqrt();
    let lqr_order = lqr.map(|l| l.sigma * l.c * l.lambda1 * (l.n * l.n) as f64 * t.sqrt());
    Ok(BoundReport {
        total_steps,
        tau,
        expected_lipschitz,
        reward: r,
        transition: p,
        lipschitz_factor,
        total,
        kolmogorov_order,
        lqr_order,
        lqr,
    })
}

/// [`regret_bound`] at each horizon in `horizons`.
pub fn bound_curve(
    reward: &FunctionClass,
    transition: &FunctionClass,
    expected_lipschitz: f64,
    tau: usize,
    horizons: &[usize],
) -> Result<Vec<BoundReport>, EluderError> {
    horizons
        .iter()
        .map(|&t| regret_bound(reward, transition, expected_lipschitz, t, tau, None))
        .collect()
}
