use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EluderError;
use crate::confsets::{quadratic_features, FiniteClass, FunctionClass, Input};

/// Relative margin around `eps` inside which a parametric verdict is left
/// undetermined rather than trusted to floating point.
pub const DEPENDENCE_REL_TOL: f64 = 1e-9;

const GOLDEN_ITERS: usize = 120;
const T_MAX: f64 = 1.0 - 1e-12;

/// A pair `(f, f~)` that is within `eps` on the prefix and more than `eps`
/// apart at the new point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    Members { f: usize, f_tilde: usize },
    Parameters { theta: DMatrix<f64>, theta_tilde: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Dependent,
    Independent(Witness),
    /// The certified bracket straddles `eps`. Callers treat this as
    /// dependent, which keeps sequence lengths certified lower bounds.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceCheck {
    pub verdict: Verdict,
    /// Certified bracket `lower <= W <= upper` on
    /// `W = sup { ||f(x) - f~(x)|| : sum_i ||f(x_i) - f~(x_i)||^2 <= eps^2 }`.
    /// Parametric checks stop as soon as the verdict is settled, so the
    /// bracket need not be tight.
    pub lower: f64,
    pub upper: f64,
    /// Relaxed upper bound `sqrt(4n - 2) eps ||phi||_{V^-1}` with
    /// `V = sum phi_i phi_i^T + (eps / 2 C_theta)^2 I` (parametric classes).
    pub relaxed: Option<f64>,
}

impl DependenceCheck {
    pub fn is_dependent(&self) -> bool {
        !matches!(self.verdict, Verdict::Independent(_))
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            Verdict::Independent(w) => Some(w),
            _ => None,
        }
    }
}

/// Decides whether `x` is `(F, eps)`-dependent on `prefix`.
///
/// Finite classes are checked over all member pairs. Linear classes
/// (`||theta||_F <= C_theta`) reduce to `max |d . phi|` over
/// `d^T Phi d <= eps^2, ||d|| <= 2 C_theta`, a convex problem whose value is
/// `min_t sqrt(phi^T M_t^-1 phi)` with `M_t = t Phi / eps^2 + (1 - t) I / (2 C_theta)^2`.
/// Every `t` gives an upper bound and the matching rescaled `M_t^-1 phi` a
/// feasible witness, so the search returns a certified bracket. Quadratic
/// classes are handled as linear classes on `vec(phi phi^T)`.
pub fn is_dependent(class: &FunctionClass, x: &Input, prefix: &[Input], eps: f64) -> Result<DependenceCheck, EluderError> {
    if !(eps > 0.0) {
        return Err(EluderError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    match class {
        FunctionClass::Finite(f) => {
            let x = point(f, x)?;
            let prefix = prefix.iter().map(|i| point(f, i)).collect::<Result<Vec<_>, _>>()?;
            Ok(finite_check(f, x, &prefix, eps))
        }
        FunctionClass::Linear { class: l, .. } => {
            let phi = features(x, l.p, l.c_phi)?;
            let gram = gram(prefix, l.p, l.c_phi, |v| v.clone())?;
            Ok(linear_check(l.n, l.c_theta, &phi, &gram, eps, None))
        }
        FunctionClass::Quadratic { class: q, .. } => {
            let phi = quadratic_features(&features(x, q.p, q.c_phi)?);
            let gram = gram(prefix, q.p, q.c_phi, quadratic_features)?;
            Ok(linear_check(1, q.c_theta, &phi, &gram, eps, Some(q.p)))
        }
        FunctionClass::Glm { .. } => Err(EluderError::Unsupported("glm")),
    }
}

fn point(f: &FiniteClass, x: &Input) -> Result<usize, EluderError> {
    match x {
        Input::Point(i) if *i < f.n_points => Ok(*i),
        _ => Err(EluderError::InvalidArgument(format!("{x:?} is not a point of the domain"))),
    }
}

fn features(x: &Input, p: usize, c_phi: f64) -> Result<DVector<f64>, EluderError> {
    match x {
        Input::Features(v) if v.len() == p => {
            if v.norm() > c_phi * (1.0 + 1e-12) {
                return Err(EluderError::InvalidArgument(format!("feature norm {} exceeds {c_phi}", v.norm())));
            }
            Ok(v.clone())
        }
        _ => Err(EluderError::InvalidArgument(format!("expected a feature vector of length {p}"))),
    }
}

fn gram(
    prefix: &[Input],
    p: usize,
    c_phi: f64,
    lift: impl Fn(&DVector<f64>) -> DVector<f64>,
) -> Result<DMatrix<f64>, EluderError> {
    let mut g: Option<DMatrix<f64>> = None;
    for x in prefix {
        let v = lift(&features(x, p, c_phi)?);
        let outer = &v * v.transpose();
        g = Some(match g {
            Some(acc) => acc + outer,
            None => outer,
        });
    }
    let dim = lift(&DVector::zeros(p)).len();
    Ok(g.unwrap_or_else(|| DMatrix::zeros(dim, dim)))
}

fn finite_check(f: &FiniteClass, x: usize, prefix: &[usize], eps: f64) -> DependenceCheck {
    let mut best = 0.0;
    let mut pair = None;
    for a in 0..f.len() {
        for b in a + 1..f.len() {
            let on_prefix: f64 = prefix.iter().map(|&i| f.distance_at(a, b, i).powi(2)).sum();
            if on_prefix <= eps * eps {
                let gap = f.distance_at(a, b, x);
                if gap > best {
                    best = gap;
                    pair = Some((a, b));
                }
            }
        }
    }
    let verdict = match pair {
        Some((a, b)) if best > eps => Verdict::Independent(Witness::Members { f: a, f_tilde: b }),
        _ => Verdict::Dependent,
    };
    DependenceCheck {
        verdict,
        lower: best,
        upper: best,
        relaxed: None,
    }
}

struct Bracket<'a> {
    gram: &'a DMatrix<f64>,
    phi: &'a DVector<f64>,
    ident: &'a DMatrix<f64>,
    eps: f64,
    r: f64,
    lower: f64,
    upper: f64,
    best_d: Option<DVector<f64>>,
}

impl Bracket<'_> {
    /// Upper bound at `t`; also rescales `M_t^-1 phi` into the feasible set
    /// and keeps it if it improves the lower bound.
    fn eval(&mut self, t: f64) -> f64 {
        let m = self.gram * (t / (self.eps * self.eps)) + self.ident * ((1.0 - t) / (self.r * self.r));
        let Some(chol) = m.cholesky() else {
            return f64::INFINITY;
        };
        let d = chol.solve(self.phi);
        let h = self.phi.dot(&d);
        if !(h > 0.0) {
            return f64::INFINITY;
        }
        let on_prefix = d.dot(&(self.gram * &d));
        let s_prefix = if on_prefix > 0.0 { self.eps / on_prefix.sqrt() } else { f64::INFINITY };
        let s = s_prefix.min(self.r / d.norm());
        // d . phi = h > 0
        let value = s * h;
        if value > self.lower {
            self.lower = value;
            self.best_d = Some(d * s);
        }
        let u = h.sqrt();
        self.upper = self.upper.min(u);
        u
    }
}

/// `sqrt(phi^T A^-1 phi)` for symmetric positive definite `A`.
pub(super) fn inverse_norm(a: &DMatrix<f64>, phi: &DVector<f64>) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let h = phi.dot(&chol.solve(phi));
    (h >= 0.0).then(|| h.sqrt())
}

fn linear_check(
    n: usize,
    c_theta: f64,
    phi: &DVector<f64>,
    gram: &DMatrix<f64>,
    eps: f64,
    square: Option<usize>,
) -> DependenceCheck {
    let dim = phi.len();
    let r = 2.0 * c_theta;
    let ident = DMatrix::<f64>::identity(dim, dim);
    let relaxed = inverse_norm(&(gram + &ident * (eps / r).powi(2)), phi).map(|v| (4.0 * n as f64 - 2.0).sqrt() * eps * v);
    if phi.norm() == 0.0 {
        return DependenceCheck {
            verdict: Verdict::Dependent,
            lower: 0.0,
            upper: 0.0,
            relaxed,
        };
    }

    let (hi_tol, lo_tol) = (eps * (1.0 + DEPENDENCE_REL_TOL), eps * (1.0 - DEPENDENCE_REL_TOL));
    let mut search = Bracket {
        gram,
        phi,
        ident: &ident,
        eps,
        r,
        lower: 0.0,
        upper: f64::INFINITY,
        best_d: None,
    };
    let settled = |s: &Bracket| s.upper <= lo_tol || s.lower > hi_tol;

    // Golden-section search on the convex map t -> phi^T M_t^-1 phi.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, T_MAX);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    search.eval(0.0);
    let mut fc = search.eval(c);
    let mut fd = search.eval(d);
    for _ in 0..GOLDEN_ITERS {
        if settled(&search) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = search.eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = search.eval(d);
        }
    }
    if !settled(&search) {
        search.eval(T_MAX);
    }
    let Bracket { lower, upper, best_d, .. } = search;

    let verdict = if upper <= lo_tol {
        Verdict::Dependent
    } else if lower > hi_tol {
        let d = best_d.expect("witness recorded with the lower bound");
        let diff = match square {
            Some(p) => DMatrix::from_column_slice(p, p, d.as_slice()),
            None => {
                let mut m = DMatrix::zeros(n, dim);
                m.row_mut(0).copy_from(&d.transpose());
                m
            }
        };
        Verdict::Independent(Witness::Parameters {
            theta: &diff * 0.5,
            theta_tilde: &diff * -0.5,
        })
    } else {
        Verdict::Undetermined
    };
    DependenceCheck {
        verdict,
        lower,
        upper,
        relaxed,
    }
}

/// Re-checks a witness directly against the class: both members admissible,
/// within `eps` on `prefix` and more than `eps` apart at `x`.
pub fn verify_witness(
    class: &FunctionClass,
    witness: &Witness,
    x: &Input,
    prefix: &[Input],
    eps: f64,
) -> Result<bool, EluderError> {
    let tol = 1.0 + 1e-9;
    match (class, witness) {
        (FunctionClass::Finite(f), Witness::Members { f: a, f_tilde: b }) => {
            let x = point(f, x)?;
            let mut on_prefix = 0.0;
            for i in prefix {
                on_prefix += f.distance_at(*a, *b, point(f, i)?).powi(2);
            }
            Ok(on_prefix <= eps * eps && f.distance_at(*a, *b, x) > eps)
        }
        (FunctionClass::Linear { class: l, .. }, Witness::Parameters { theta, theta_tilde }) => {
            let diff = theta - theta_tilde;
            let eval = |v: &Input| features(v, l.p, l.c_phi).map(|phi| (&diff * phi).norm());
            let mut on_prefix = 0.0;
            for i in prefix {
                on_prefix += eval(i)?.powi(2);
            }
            Ok(theta.norm() <= l.c_theta * tol
                && theta_tilde.norm() <= l.c_theta * tol
                && on_prefix <= eps * eps * tol
                && eval(x)? > eps)
        }
        (FunctionClass::Quadratic { class: q, .. }, Witness::Parameters { theta, theta_tilde }) => {
            let diff = theta - theta_tilde;
            let eval = |v: &Input| features(v, q.p, q.c_phi).map(|phi| phi.dot(&(&diff * &phi)).abs());
            let mut on_prefix = 0.0;
            for i in prefix {
                on_prefix += eval(i)?.powi(2);
            }
            Ok(theta.norm() <= q.c_theta * tol
                && theta_tilde.norm() <= q.c_theta * tol
                && on_prefix <= eps * eps * tol
                && eval(x)? > eps)
        }
        (FunctionClass::Glm { .. }, _) => Err(EluderError::Unsupported("glm")),
        _ => Err(EluderError::InvalidArgument("witness does not match the class kind".into())),
    }
}
