use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dependence::inverse_norm;
use super::EluderError;
use crate::confsets::{covering_number, FunctionClass};
use crate::stats::fit_line;

/// Upper bound on `max { B : (1 + x)^B <= alpha B + 1 }`:
/// `(1 + x) / x * e / (e - 1) * (ln(1 + alpha) + ln((1 + x) / x))`.
pub fn b_bound(x: f64, alpha: f64) -> f64 {
    let ratio = (1.0 + x) / x;
    ratio * E / (E - 1.0) * (alpha.ln_1p() + ratio.ln())
}

/// `p (4n - 1) e/(e - 1) ln[(1 + (2 C_phi C_theta / eps)^2)(4n - 1)] + 1`,
/// written through [`b_bound`] at `x = 1 / (m - 1)` so that `(1 + x) / x = m`.
fn determinant_bound(p: usize, m: f64, scale: f64, eps: f64) -> f64 {
    let alpha = (2.0 * scale / eps).powi(2);
    p as f64 * b_bound(1.0 / (m - 1.0), alpha) + 1.0
}

/// Closed-form upper bound on `dim_E(F, eps)`.
///
/// Finite input domains give their size. Linear classes use the
/// determinant-potential bound with factor `4n - 1`, quadratic classes the
/// linear result with tolerance `eps / (p C_phi^2)` and factor `4p - 1`, and
/// GLM classes the factor `r^2 (4n - 2) + 1`. A parametric class with a finite
/// domain returns the smaller of the two.
pub fn analytic_eluder_bound(class: &FunctionClass, eps: f64) -> Result<f64, EluderError> {
    if !(eps > 0.0) {
        return Err(EluderError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    class.validate()?;
    let parametric = match class {
        FunctionClass::Finite(f) => return Ok(f.n_points as f64),
        FunctionClass::Linear { class: l, .. } => determinant_bound(l.p, 4.0 * l.n as f64 - 1.0, l.c_phi * l.c_theta, eps),
        FunctionClass::Quadratic { class: q, .. } => {
            let p = q.p as f64;
            determinant_bound(q.p, 4.0 * p - 1.0, p * q.c_phi * q.c_phi * q.c_theta, eps)
        }
        FunctionClass::Glm { class: g, .. } => {
            let r = g.condition_number();
            determinant_bound(g.p, r * r * (4.0 * g.n as f64 - 2.0) + 1.0, g.c_phi * g.c_theta, eps)
        }
    };
    Ok(match class.domain_size() {
        Some(x) => parametric.min(x as f64),
        None => parametric,
    })
}

/// `sqrt(2n - 1) eps ||phi||_{V^-1}`: upper bound on
/// `max ||theta phi||_2` subject to `Tr(theta V theta^T) <= eps^2`.
pub fn trace_constrained_norm_bound(phi: &DVector<f64>, v: &DMatrix<f64>, eps: f64, n: usize) -> Result<f64, EluderError> {
    if !v.is_square() || v.nrows() != phi.len() {
        return Err(EluderError::InvalidArgument(format!(
            "V is {}x{} but phi has length {}",
            v.nrows(),
            v.ncols(),
            phi.len()
        )));
    }
    if n == 0 || eps < 0.0 {
        return Err(EluderError::InvalidArgument(format!("need n >= 1 and eps >= 0, got {n}, {eps}")));
    }
    let scale = v.amax().max(1.0);
    if (v - v.transpose()).amax() > 1e-12 * scale {
        return Err(EluderError::NotPositiveDefinite);
    }
    let norm = inverse_norm(v, phi).ok_or(EluderError::NotPositiveDefinite)?;
    Ok((2.0 * n as f64 - 1.0).sqrt() * eps * norm)
}

/// Log-log fit of `ln N(F, alpha)` against `ln(1 / alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub residuals: Vec<f64>,
    pub alphas: Vec<f64>,
    pub log_covering: Vec<f64>,
    /// False when the covering numbers are the parametric surrogate.
    pub exact: bool,
}

/// Slope of `ln N(F, alpha)` against `ln(1 / alpha)` over `alphas`. The grid
/// needs at least three points spanning two decades.
pub fn kolmogorov_dimension_estimate(class: &FunctionClass, alphas: &[f64]) -> Result<KolmogorovEstimate, EluderError> {
    if alphas.len() < 3 {
        return Err(EluderError::InvalidArgument(format!("need at least 3 grid points, got {}", alphas.len())));
    }
    if alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(EluderError::InvalidArgument("covering scales must be positive".into()));
    }
    let (lo, hi) = alphas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), a| (l.min(*a), h.max(*a)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(EluderError::InvalidArgument(format!("grid spans {lo}..{hi}, less than two decades")));
    }
    let covers = alphas
        .iter()
        .map(|a| covering_number(class, *a, None))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = alphas.iter().map(|a| -a.ln()).collect();
    let ys: Vec<f64> = covers.iter().map(|c| c.log_value).collect();
    let fit = fit_line(&xs, &ys, 0.95).ok_or_else(|| EluderError::InvalidArgument("degenerate grid".into()))?;
    Ok(KolmogorovEstimate {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_ci: fit.slope_ci,
        residuals: fit.residuals,
        alphas: alphas.to_vec(),
        log_covering: ys,
        exact: covers.iter().all(|c| c.exact),
    })
}

/// Analytic Kolmogorov dimension: the parameter count for parametric
/// classes and zero for finite ones.
pub fn kolmogorov_surrogate(class: &FunctionClass) -> f64 {
    class.param_dim().map_or(0.0, |d| d as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confsets::{FiniteClass, GlmClass, LinearClass, QuadraticClass};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(n: usize, p: usize, c_theta: f64) -> FunctionClass {
        FunctionClass::linear(LinearClass {
            n,
            p,
            c_theta,
            c_phi: 1.0,
            c: c_theta,
            sigma: 1.0,
        })
    }

    /// Largest real `B` with `(1 + x)^B <= alpha B + 1`, by scanning a coarse
    /// grid for the last feasible point and refining with bisection.
    fn b_search(x: f64, alpha: f64) -> f64 {
        let ok = |b: f64| (1.0 + x).powf(b) <= alpha * b + 1.0;
        let mut b = 0.0;
        let mut last_ok = 0.0;
        while b < 1e5 {
            if ok(b) {
                last_ok = b;
            }
            b += 0.01;
        }
        let (mut lo, mut hi) = (last_ok, last_ok + 0.01);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn b_bound_dominates_direct_search() {
        for x in [0.1, 0.2, 1.0 / 6.0, 0.5, 1.0, 2.0] {
            for alpha in [0.5, 1.0, 4.0, 16.0, 100.0] {
                let exact = b_search(x, alpha);
                assert!(b_bound(x, alpha) >= exact, "x={x} alpha={alpha}: {} < {exact}", b_bound(x, alpha));
            }
        }
    }

    #[test]
    fn linear_hand_example() {
        let v = analytic_eluder_bound(&linear(1, 1, 1.0), 2.0).unwrap();
        let expected = 3.0 * E / (E - 1.0) * 6f64.ln() + 1.0;
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 9.503565233893994).abs() < 1e-9);
    }

    #[test]
    fn finite_domain_returns_size() {
        let members = vec![vec![0.0; 10], vec![1.0; 10]];
        let class = FunctionClass::Finite(FiniteClass::new(10, 1, members, 1.0, 1.0).unwrap());
        assert_eq!(analytic_eluder_bound(&class, 0.1).unwrap(), 10.0);
        assert_eq!(analytic_eluder_bound(&linear(1, 4, 1.0).with_domain_size(3), 0.01).unwrap(), 3.0);
    }

    #[test]
    fn glm_with_unit_condition_number_equals_linear() {
        for (n, p, eps) in [(1, 1, 0.5), (3, 2, 0.1), (2, 5, 1.7)] {
            let glm = FunctionClass::glm(GlmClass {
                n,
                p,
                c_theta: 1.3,
                c_phi: 0.8,
                c: 1.0,
                sigma: 1.0,
                h_low: 0.7,
                h_high: 0.7,
            });
            let lin = FunctionClass::linear(LinearClass {
                n,
                p,
                c_theta: 1.3,
                c_phi: 0.8,
                c: 1.0,
                sigma: 1.0,
            });
            assert_eq!(analytic_eluder_bound(&glm, eps).unwrap(), analytic_eluder_bound(&lin, eps).unwrap());
        }
    }

    #[test]
    fn quadratic_matches_hand_form() {
        let q = FunctionClass::quadratic(QuadraticClass {
            p: 3,
            c_theta: 0.5,
            c_phi: 2.0,
            c: 6.0,
            sigma: 1.0,
        });
        let eps: f64 = 0.25;
        let expected = 3.0 * 11.0 * E / (E - 1.0) * ((1.0 + (2.0 * 3.0 * 4.0 * 0.5 / eps).powi(2)) * 11.0).ln() + 1.0;
        assert!((analytic_eluder_bound(&q, eps).unwrap() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn analytic_bound_is_monotone_in_eps() {
        let mut last = f64::INFINITY;
        for eps in [0.001, 0.01, 0.1, 1.0, 10.0] {
            let v = analytic_eluder_bound(&linear(2, 3, 1.0), eps).unwrap();
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn trace_bound_scalar_case() {
        let phi = DVector::from_vec(vec![0.6, 0.8]);
        let v = DMatrix::identity(2, 2);
        assert!((trace_constrained_norm_bound(&phi, &v, 0.3, 1).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn trace_bound_rejects_indefinite() {
        let phi = DVector::from_vec(vec![1.0, 0.0]);
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(trace_constrained_norm_bound(&phi, &v, 1.0, 1), Err(EluderError::NotPositiveDefinite));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(trace_constrained_norm_bound(&phi, &asym, 1.0, 1), Err(EluderError::NotPositiveDefinite));
    }

    /// Projected gradient ascent on `||theta phi||^2` in whitened
    /// coordinates `psi = theta L` (`V = L L^T`), where the constraint is the
    /// Frobenius ball of radius `eps` and projection is a rescale.
    fn numerical_max(phi: &DVector<f64>, v: &DMatrix<f64>, eps: f64, n: usize, rng: &mut ChaCha8Rng) -> f64 {
        let l = v.clone().cholesky().unwrap().l();
        let u = l.solve_lower_triangular(phi).unwrap();
        let step = 10.0 / u.norm_squared();
        let project = |t: DMatrix<f64>| {
            let f = t.norm();
            if f > eps {
                t * (eps / f)
            } else {
                t
            }
        };
        let mut psi = project(DMatrix::from_fn(n, phi.len(), |_, _| rng.random_range(-1.0..1.0)) * 10.0);
        let mut best: f64 = 0.0;
        for _ in 0..5000 {
            let grad = &psi * &u * u.transpose() * 2.0;
            psi = project(&psi + grad * step);
            best = best.max((&psi * &u).norm());
        }
        best
    }

    #[test]
    fn trace_bound_is_sound_and_tight_for_n_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let n = 1 + trial % 3;
            let p = 1 + rng.random_range(0..4);
            let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            let v = &a * a.transpose() + DMatrix::identity(p, p) * 0.1;
            let phi = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let eps = rng.random_range(0.1..2.0);
            let bound = trace_constrained_norm_bound(&phi, &v, eps, n).unwrap();
            let best = numerical_max(&phi, &v, eps, n, &mut rng);
            assert!(best <= bound * (1.0 + 1e-6), "{best} > {bound}");
            if n == 1 {
                assert!((best - bound).abs() <= 1e-8 * bound.max(1.0), "{best} vs {bound}");
            }
        }
    }

    #[test]
    fn finite_class_slope_vanishes() {
        let members = vec![vec![0.0, 0.0], vec![0.5, 0.1], vec![1.0, -1.0]];
        let class = FunctionClass::Finite(FiniteClass::new(2, 1, members, 1.0, 1.0).unwrap());
        let est = kolmogorov_dimension_estimate(&class, &[1e-3, 1e-4, 1e-5, 1e-6]).unwrap();
        assert!(est.slope.abs() < 1e-12);
        assert!(est.exact);
    }

    #[test]
    fn linear_slope_tracks_parameter_count() {
        let grid: Vec<f64> = (0..9).map(|i| 10f64.powf(-2.0 - 0.5 * i as f64)).collect();
        for (n, p) in [(1, 1), (2, 3), (3, 4)] {
            let est = kolmogorov_dimension_estimate(&linear(n, p, 1.0), &grid).unwrap();
            let np = (n * p) as f64;
            assert!((est.slope - np).abs() <= 0.15 * np, "{} vs {np}", est.slope);
            let doubled = kolmogorov_dimension_estimate(&linear(n, p, 2.0), &grid).unwrap();
            assert!((doubled.slope - est.slope).abs() <= 0.02 * est.slope);
        }
    }

    #[test]
    fn kolmogorov_rejects_short_grids() {
        assert!(kolmogorov_dimension_estimate(&linear(1, 1, 1.0), &[1e-2, 1e-4]).is_err());
        assert!(kolmogorov_dimension_estimate(&linear(1, 1, 1.0), &[1e-2, 5e-3, 1e-3]).is_err());
    }
}
