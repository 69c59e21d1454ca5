use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ConfsetError;

/// Explicitly enumerated class over a finite domain `{0, .., n_points - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    pub n_points: usize,
    pub out_dim: usize,
    /// `members[m][x * out_dim + j]` is component `j` of member `m` at point `x`.
    pub members: Vec<Vec<f64>>,
    pub c: f64,
    pub sigma: f64,
}

impl FiniteClass {
    pub fn new(n_points: usize, out_dim: usize, members: Vec<Vec<f64>>, c: f64, sigma: f64) -> Result<Self, ConfsetError> {
        if members.is_empty() || n_points == 0 || out_dim == 0 {
            return Err(ConfsetError::InvalidClass("finite class needs members, points and outputs".into()));
        }
        if !(c > 0.0) || !(sigma >= 0.0) {
            return Err(ConfsetError::InvalidClass(format!("bad constants C={c}, sigma={sigma}")));
        }
        for (m, f) in members.iter().enumerate() {
            if f.len() != n_points * out_dim {
                return Err(ConfsetError::DimensionMismatch {
                    expected: n_points * out_dim,
                    actual: f.len(),
                });
            }
            for x in 0..n_points {
                let norm = f[x * out_dim..(x + 1) * out_dim].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > c * (1.0 + 1e-12) {
                    return Err(ConfsetError::InvalidClass(format!(
                        "member {m} has norm {norm} > {c} at point {x}"
                    )));
                }
            }
        }
        Ok(Self {
            n_points,
            out_dim,
            members,
            c,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn value(&self, member: usize, x: usize) -> &[f64] {
        &self.members[member][x * self.out_dim..(x + 1) * self.out_dim]
    }

    /// `||f_a(x) - f_b(x)||_2`.
    pub fn distance_at(&self, a: usize, b: usize, x: usize) -> f64 {
        self.value(a, x)
            .iter()
            .zip(self.value(b, x))
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `f_theta(x) = theta phi(x)` with `theta` an `n x p` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearClass {
    pub n: usize,
    pub p: usize,
    /// Bound on `||theta||_2`.
    pub c_theta: f64,
    /// Bound on `||phi(x)||_2`.
    pub c_phi: f64,
    /// Bound on `||f(x)||_2`.
    pub c: f64,
    pub sigma: f64,
}

/// `f_theta(x) = phi(x)^T theta phi(x)` with `theta` a `p x p` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticClass {
    pub p: usize,
    pub c_theta: f64,
    pub c_phi: f64,
    pub c: f64,
    pub sigma: f64,
}

/// `f_theta(x) = g(theta phi(x))` with a component-wise link whose slope
/// lies in `[h_low, h_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmClass {
    pub n: usize,
    pub p: usize,
    pub c_theta: f64,
    pub c_phi: f64,
    pub c: f64,
    pub sigma: f64,
    pub h_low: f64,
    pub h_high: f64,
}

impl GlmClass {
    /// Condition number `r = h_high / h_low`.
    pub fn condition_number(&self) -> f64 {
        self.h_high / self.h_low
    }
}

/// Function class descriptor.
///
/// Parametric classes may also declare a finite input domain of
/// `domain_size` points, which caps their eluder dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionClass {
    Finite(FiniteClass),
    Linear {
        #[serde(flatten)]
        class: LinearClass,
        domain_size: Option<usize>,
    },
    Quadratic {
        #[serde(flatten)]
        class: QuadraticClass,
        domain_size: Option<usize>,
    },
    Glm {
        #[serde(flatten)]
        class: GlmClass,
        domain_size: Option<usize>,
    },
}

impl FunctionClass {
    pub fn linear(class: LinearClass) -> Self {
        FunctionClass::Linear {
            class,
            domain_size: None,
        }
    }

    pub fn quadratic(class: QuadraticClass) -> Self {
        FunctionClass::Quadratic {
            class,
            domain_size: None,
        }
    }

    pub fn glm(class: GlmClass) -> Self {
        FunctionClass::Glm {
            class,
            domain_size: None,
        }
    }

    /// Tabular mean rewards over `n_pairs` state-action pairs as a linear
    /// class with one-hot features.
    pub fn tabular_rewards(n_pairs: usize, reward_bound: f64, sigma: f64) -> Self {
        FunctionClass::Linear {
            class: LinearClass {
                n: 1,
                p: n_pairs,
                c_theta: reward_bound,
                c_phi: 1.0,
                c: reward_bound,
                sigma,
            },
            domain_size: Some(n_pairs),
        }
    }

    /// Tabular transitions as a linear class: column `x` of `theta` is the
    /// next-state distribution of pair `x` (one-hot embedding of states).
    ///
    /// The centred one-hot observation noise has range at most `sqrt(2)` in
    /// every direction, hence sub-Gaussian scale `1/sqrt(2)`. `c_theta` bounds
    /// column norms, which is what the sup-over-inputs covering needs.
    pub fn tabular_transitions(n_states: usize, n_pairs: usize) -> Self {
        FunctionClass::Linear {
            class: LinearClass {
                n: n_states,
                p: n_pairs,
                c_theta: 1.0,
                c_phi: 1.0,
                c: 1.0,
                sigma: std::f64::consts::FRAC_1_SQRT_2,
            },
            domain_size: Some(n_pairs),
        }
    }

    pub fn with_domain_size(self, size: usize) -> Self {
        match self {
            FunctionClass::Finite(_) => self,
            FunctionClass::Linear { class, .. } => FunctionClass::Linear {
                class,
                domain_size: Some(size),
            },
            FunctionClass::Quadratic { class, .. } => FunctionClass::Quadratic {
                class,
                domain_size: Some(size),
            },
            FunctionClass::Glm { class, .. } => FunctionClass::Glm {
                class,
                domain_size: Some(size),
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FunctionClass::Finite(_) => "finite-list",
            FunctionClass::Linear { .. } => "linear",
            FunctionClass::Quadratic { .. } => "quadratic",
            FunctionClass::Glm { .. } => "glm",
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            FunctionClass::Finite(f) => f.sigma,
            FunctionClass::Linear { class, .. } => class.sigma,
            FunctionClass::Quadratic { class, .. } => class.sigma,
            FunctionClass::Glm { class, .. } => class.sigma,
        }
    }

    /// Bound `C` on the mean norm.
    pub fn c_bound(&self) -> f64 {
        match self {
            FunctionClass::Finite(f) => f.c,
            FunctionClass::Linear { class, .. } => class.c,
            FunctionClass::Quadratic { class, .. } => class.c,
            FunctionClass::Glm { class, .. } => class.c,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            FunctionClass::Finite(f) => f.out_dim,
            FunctionClass::Linear { class, .. } => class.n,
            FunctionClass::Quadratic { .. } => 1,
            FunctionClass::Glm { class, .. } => class.n,
        }
    }

    /// Number of scalar parameters (`None` for finite classes).
    pub fn param_dim(&self) -> Option<usize> {
        match self {
            FunctionClass::Finite(_) => None,
            FunctionClass::Linear { class, .. } => Some(class.n * class.p),
            FunctionClass::Quadratic { class, .. } => Some(class.p * class.p),
            FunctionClass::Glm { class, .. } => Some(class.n * class.p),
        }
    }

    pub fn theta_bound(&self) -> Option<f64> {
        match self {
            FunctionClass::Finite(_) => None,
            FunctionClass::Linear { class, .. } => Some(class.c_theta),
            FunctionClass::Quadratic { class, .. } => Some(class.c_theta),
            FunctionClass::Glm { class, .. } => Some(class.c_theta),
        }
    }

    /// Size of a finite input domain, if any.
    pub fn domain_size(&self) -> Option<usize> {
        match self {
            FunctionClass::Finite(f) => Some(f.n_points),
            FunctionClass::Linear { domain_size, .. }
            | FunctionClass::Quadratic { domain_size, .. }
            | FunctionClass::Glm { domain_size, .. } => *domain_size,
        }
    }

    /// Checks constants are strictly positive (noise may be zero).
    pub fn validate(&self) -> Result<(), ConfsetError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let good = match self {
            FunctionClass::Finite(f) => ok(f.c) && f.sigma >= 0.0 && !f.members.is_empty(),
            FunctionClass::Linear { class: l, .. } => {
                l.n > 0 && l.p > 0 && ok(l.c_theta) && ok(l.c_phi) && ok(l.c) && l.sigma >= 0.0
            }
            FunctionClass::Quadratic { class: q, .. } => {
                q.p > 0 && ok(q.c_theta) && ok(q.c_phi) && ok(q.c) && q.sigma >= 0.0
            }
            FunctionClass::Glm { class: g, .. } => {
                g.n > 0
                    && g.p > 0
                    && ok(g.c_theta)
                    && ok(g.c_phi)
                    && ok(g.c)
                    && g.sigma >= 0.0
                    && ok(g.h_low)
                    && g.h_high >= g.h_low
            }
        };
        if good {
            Ok(())
        } else {
            Err(ConfsetError::InvalidClass(format!("nonpositive constant in {} class", self.kind())))
        }
    }
}

/// Quadratic features `vec(phi phi^T)` (column-major), so that
/// `phi^T theta phi = vec(theta) . vec(phi phi^T)`.
pub fn quadratic_features(phi: &DVector<f64>) -> DVector<f64> {
    let p = phi.len();
    DVector::from_fn(p * p, |k, _| phi[k % p] * phi[k / p])
}
