use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{quadratic_features, ConfsetError, FunctionClass};
use crate::environments::GlmLink;

/// Ridge added when the normal equations are singular.
pub const NORMAL_EQUATIONS_RIDGE: f64 = 1e-10;
/// Gradient-norm tolerance of the damped Newton solver.
pub const NEWTON_GRAD_TOL: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 500;

/// Input of one regression observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Input {
    /// Index into a finite domain.
    Point(usize),
    /// Raw feature vector `phi(x)`.
    Features(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Input,
    pub y: DVector<f64>,
}

impl Observation {
    pub fn point(x: usize, y: DVector<f64>) -> Self {
        Self { x: Input::Point(x), y }
    }

    pub fn features(phi: DVector<f64>, y: DVector<f64>) -> Self {
        Self {
            x: Input::Features(phi),
            y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Center {
    /// Member index of a finite class.
    Member(usize),
    /// Parameter matrix (`1 x p^2`, column-major `vec(theta)`, for quadratic classes).
    Parameter(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqFit {
    pub center: Center,
    /// `L_2(center) = sum_i ||f(x_i) - y_i||^2`.
    pub loss: f64,
    /// True when the ridge was applied to singular normal equations.
    pub regularized: bool,
}

fn glm_link(class: &FunctionClass) -> Option<GlmLink> {
    match class {
        FunctionClass::Glm { class, .. } => Some(GlmLink {
            h_low: class.h_low,
            h_high: class.h_high,
        }),
        _ => None,
    }
}

/// Feature vector used for regression: `phi` itself, or `vec(phi phi^T)` for
/// quadratic classes.
pub fn regression_features(class: &FunctionClass, phi: &DVector<f64>) -> DVector<f64> {
    match class {
        FunctionClass::Quadratic { .. } => quadratic_features(phi),
        _ => phi.clone(),
    }
}

/// Prediction `f_theta(x)` of a parametric class.
pub fn predict(class: &FunctionClass, theta: &DMatrix<f64>, phi: &DVector<f64>) -> DVector<f64> {
    let z = theta * regression_features(class, phi);
    match glm_link(class) {
        Some(link) => z.map(|v| link.eval(v)),
        None => z,
    }
}

fn check_dims(class: &FunctionClass, obs: &Observation) -> Result<(), ConfsetError> {
    if obs.y.len() != class.out_dim() {
        return Err(ConfsetError::DimensionMismatch {
            expected: class.out_dim(),
            actual: obs.y.len(),
        });
    }
    match (class, &obs.x) {
        (FunctionClass::Finite(f), Input::Point(x)) if *x < f.n_points => Ok(()),
        (FunctionClass::Finite(f), Input::Point(x)) => Err(ConfsetError::DimensionMismatch {
            expected: f.n_points,
            actual: *x,
        }),
        (FunctionClass::Linear { class: l, .. }, Input::Features(phi)) if phi.len() == l.p => Ok(()),
        (FunctionClass::Quadratic { class: q, .. }, Input::Features(phi)) if phi.len() == q.p => Ok(()),
        (FunctionClass::Glm { class: g, .. }, Input::Features(phi)) if phi.len() == g.p => Ok(()),
        (_, Input::Features(phi)) => Err(ConfsetError::DimensionMismatch {
            expected: 0,
            actual: phi.len(),
        }),
        _ => Err(ConfsetError::InvalidArgument(format!(
            "input kind does not match {} class",
            class.kind()
        ))),
    }
}

/// Cumulative squared prediction error of `center` on `data`.
pub fn squared_loss(class: &FunctionClass, center: &Center, data: &[Observation]) -> f64 {
    data.iter()
        .map(|o| match (center, &o.x) {
            (Center::Member(m), Input::Point(x)) => {
                let FunctionClass::Finite(f) = class else {
                    unreachable!("member centre requires a finite class")
                };
                f.value(*m, *x).iter().zip(o.y.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            }
            (Center::Parameter(theta), Input::Features(phi)) => (predict(class, theta, phi) - &o.y).norm_squared(),
            _ => f64::INFINITY,
        })
        .sum()
}

/// Solves `theta V = cross` for symmetric PSD `V`, adding the ridge when `V`
/// is numerically singular. Returns `(theta, regularized)`.
pub fn solve_normal_equations(gram: &DMatrix<f64>, cross: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let q = gram.nrows();
    let scale = gram.amax().max(1.0);
    let min_eig = gram
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &e| m.min(e));
    let singular = min_eig <= 1e-12 * scale;
    let v = if singular {
        gram + DMatrix::identity(q, q) * NORMAL_EQUATIONS_RIDGE
    } else {
        gram.clone()
    };
    let theta = match v.clone().cholesky() {
        Some(ch) => ch.solve(&cross.transpose()).transpose(),
        None => {
            let pinv = v.pseudo_inverse(1e-14).expect("pseudo-inverse exists");
            cross * pinv
        }
    };
    (theta, singular)
}

fn fit_glm_row(link: GlmLink, phis: &[DVector<f64>], ys: &[f64], p: usize) -> DVector<f64> {
    let loss = |w: &DVector<f64>| -> f64 {
        phis.iter().zip(ys).map(|(phi, y)| (link.eval(w.dot(phi)) - y).powi(2)).sum()
    };
    let mut w = DVector::zeros(p);
    let mut mu = 1e-3;
    let mut current = loss(&w);
    for _ in 0..NEWTON_MAX_ITERS {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for (phi, y) in phis.iter().zip(ys) {
            let z = w.dot(phi);
            let d = link.derivative(z);
            let r = link.eval(z) - y;
            grad += phi * (2.0 * r * d);
            hess += phi * phi.transpose() * (2.0 * d * d);
        }
        if grad.norm() <= NEWTON_GRAD_TOL {
            break;
        }
        // Levenberg damping: shrink on success, grow until the loss decreases.
        let mut improved = false;
        for _ in 0..60 {
            let damped = &hess + DMatrix::identity(p, p) * mu;
            let step = damped.cholesky().map(|ch| ch.solve(&grad)).unwrap_or_else(|| &grad / mu);
            let cand = &w - step;
            let l = loss(&cand);
            if l <= current {
                w = cand;
                current = l;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    w
}

/// Least-squares centre `argmin_f L_2(f)` over the class.
///
/// Finite classes enumerate (ties go to the first index). Linear and
/// quadratic classes use the normal equations. Generalized-linear classes use
/// damped Newton per output row.
pub fn least_squares_fit(class: &FunctionClass, data: &[Observation]) -> Result<LsqFit, ConfsetError> {
    if data.is_empty() {
        return Err(ConfsetError::InvalidArgument("least squares needs data".into()));
    }
    for o in data {
        check_dims(class, o)?;
    }
    if let FunctionClass::Finite(f) = class {
        let mut best = (0usize, f64::INFINITY);
        for m in 0..f.len() {
            let l = squared_loss(class, &Center::Member(m), data);
            if l < best.1 {
                best = (m, l);
            }
        }
        return Ok(LsqFit {
            center: Center::Member(best.0),
            loss: best.1,
            regularized: false,
        });
    }
    let feats: Vec<DVector<f64>> = data
        .iter()
        .map(|o| match &o.x {
            Input::Features(phi) => regression_features(class, phi),
            Input::Point(_) => unreachable!("checked above"),
        })
        .collect();
    let q = feats[0].len();
    let n = class.out_dim();
    let (theta, regularized) = match glm_link(class) {
        None => {
            let mut gram = DMatrix::zeros(q, q);
            let mut cross = DMatrix::zeros(n, q);
            for (psi, o) in feats.iter().zip(data) {
                gram += psi * psi.transpose();
                cross += &o.y * psi.transpose();
            }
            solve_normal_equations(&gram, &cross)
        }
        Some(link) => {
            let mut theta = DMatrix::zeros(n, q);
            for j in 0..n {
                let ys: Vec<f64> = data.iter().map(|o| o.y[j]).collect();
                let row = fit_glm_row(link, &feats, &ys, q);
                theta.set_row(j, &row.transpose());
            }
            (theta, false)
        }
    };
    let center = Center::Parameter(theta);
    let loss = squared_loss(class, &center, data);
    Ok(LsqFit {
        center,
        loss,
        regularized,
    })
}
