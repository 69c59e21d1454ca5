use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::stats::fit_line;

/// Least-squares fit of `log(regret)` against `log T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci: (f64, f64),
    /// `(T, regret)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    /// Horizons dropped because their regret was not positive.
    pub excluded: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Fits the log-log slope of mean cumulative regret over a grid of horizons.
///
/// Needs at least four horizons spanning two decades. Nonpositive regret
/// values are dropped with a warning; the remaining points must still number
/// at least three.
pub fn scaling_regression(points: &[(f64, f64)]) -> Result<ScalingReport, HarnessError> {
    if points.len() < 4 {
        return Err(HarnessError::Config(format!("scaling needs at least 4 horizons, got {}", points.len())));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(HarnessError::Config(format!("scaling grid must span two decades, got [{lo}, {hi}]")));
    }
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for &(t, r) in points {
        if r > 0.0 && r.is_finite() {
            kept.push((t, r));
        } else {
            excluded.push(t);
            warnings.push(format!("regret {r} at T = {t} is not positive; excluded from the fit"));
        }
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&xs, &ys, 0.95)
        .ok_or_else(|| HarnessError::Config(format!("only {} usable scaling points", kept.len())))?;
    Ok(ScalingReport {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_stderr,
        slope_ci: fit.slope_ci,
        points: kept,
        excluded,
        warnings,
    })
}
