use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::{predict, regression_features, solve_normal_equations};
use super::{least_squares_fit, Center, ConfsetError, FiniteClass, FunctionClass, Observation};

/// `F_t(beta) = {f : ||f - f_hat||_{2,E_t} <= sqrt(beta)}` for a finite class.
///
/// Keeps per-point counts and per-member cumulative losses so that updates
/// cost `O(members)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteConfidenceSet {
    class: FiniteClass,
    counts: Vec<usize>,
    losses: Vec<f64>,
    beta: f64,
}

impl FiniteConfidenceSet {
    pub fn new(class: FiniteClass) -> Self {
        let m = class.len();
        Self {
            counts: vec![0; class.n_points],
            losses: vec![0.0; m],
            class,
            beta: 0.0,
        }
    }

    pub fn class(&self) -> &FiniteClass {
        &self.class
    }

    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn observe(&mut self, x: usize, y: &[f64]) -> Result<(), ConfsetError> {
        if x >= self.class.n_points || y.len() != self.class.out_dim {
            return Err(ConfsetError::DimensionMismatch {
                expected: self.class.n_points,
                actual: x,
            });
        }
        self.counts[x] += 1;
        for (m, loss) in self.losses.iter_mut().enumerate() {
            *loss += self.class.value(m, x).iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(())
    }

    pub fn observations(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Least-squares member (first index on ties).
    pub fn center(&self) -> usize {
        let mut best = 0;
        for m in 1..self.losses.len() {
            if self.losses[m] < self.losses[best] {
                best = m;
            }
        }
        best
    }

    pub fn loss(&self, member: usize) -> f64 {
        self.losses[member]
    }

    /// `||f_a - f_b||^2_{2,E_t}`.
    pub fn empirical_distance2(&self, a: usize, b: usize) -> f64 {
        (0..self.class.n_points)
            .filter(|&x| self.counts[x] > 0)
            .map(|x| self.counts[x] as f64 * self.class.distance_at(a, b, x).powi(2))
            .sum()
    }

    pub fn contains(&self, member: usize) -> bool {
        self.empirical_distance2(member, self.center()) <= self.beta
    }

    pub fn members_inside(&self) -> Vec<usize> {
        (0..self.class.len()).filter(|&m| self.contains(m)).collect()
    }

    /// Exact width: max over member pairs inside the set.
    pub fn width(&self, x: usize) -> f64 {
        let inside = self.members_inside();
        let mut w: f64 = 0.0;
        for (i, &a) in inside.iter().enumerate() {
            for &b in &inside[i + 1..] {
                w = w.max(self.class.distance_at(a, b, x));
            }
        }
        w
    }
}

/// Confidence set for linear, quadratic or generalized-linear classes.
///
/// Widths use `V = sum psi psi^T + lambda I` over regression features `psi`.
/// For two members in the set `D = theta - theta'` satisfies
/// `Tr(D Phi D^T) <= 4 beta` (divided by `h_low^2` for GLMs) and
/// `lambda ||D||_F^2 <= 4 lambda r C_theta^2` with `r` the rank bound of `D`,
/// so the trace-constrained norm bound gives the width bound
/// `2 sqrt(2n - 1) sqrt(beta' + lambda r C_theta^2) ||psi||_{V^{-1}}`, clipped to `2C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricConfidenceSet {
    class: FunctionClass,
    ridge: f64,
    gram: DMatrix<f64>,
    data: Vec<Observation>,
    beta: f64,
    center: Option<DMatrix<f64>>,
    regularized: bool,
}

impl ParametricConfidenceSet {
    pub fn new(class: FunctionClass, ridge: f64) -> Result<Self, ConfsetError> {
        class.validate()?;
        let q = match &class {
            FunctionClass::Finite(_) => {
                return Err(ConfsetError::InvalidArgument(
                    "finite classes use FiniteConfidenceSet".into(),
                ))
            }
            FunctionClass::Linear { class, .. } => class.p,
            FunctionClass::Quadratic { class, .. } => class.p * class.p,
            FunctionClass::Glm { class, .. } => class.p,
        };
        if !(ridge > 0.0) {
            return Err(ConfsetError::InvalidArgument(format!("ridge must be positive, got {ridge}")));
        }
        Ok(Self {
            class,
            ridge,
            gram: DMatrix::zeros(q, q),
            data: vec![],
            beta: 0.0,
            center: None,
            regularized: false,
        })
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn observations(&self) -> usize {
        self.data.len()
    }

    /// Regularized design matrix `V`.
    pub fn design(&self) -> DMatrix<f64> {
        let q = self.gram.nrows();
        &self.gram + DMatrix::identity(q, q) * self.ridge
    }

    pub fn observe(&mut self, phi: DVector<f64>, y: DVector<f64>) -> Result<(), ConfsetError> {
        let obs = Observation::features(phi, y);
        // Validates dimensions against the class.
        least_squares_fit(&self.class, std::slice::from_ref(&obs))?;
        let crate::confsets::Input::Features(phi) = &obs.x else {
            unreachable!()
        };
        let psi = regression_features(&self.class, phi);
        self.gram += &psi * psi.transpose();
        self.data.push(obs);
        self.center = None;
        Ok(())
    }

    /// Recomputes the least-squares centre. Returns whether the normal
    /// equations needed the ridge.
    pub fn refit(&mut self) -> Result<bool, ConfsetError> {
        if self.data.is_empty() {
            let q = self.gram.nrows();
            self.center = Some(DMatrix::zeros(self.class.out_dim(), q));
            self.regularized = false;
            return Ok(false);
        }
        let fit = least_squares_fit(&self.class, &self.data)?;
        let Center::Parameter(theta) = fit.center else {
            unreachable!("parametric fit")
        };
        self.center = Some(theta);
        self.regularized = fit.regularized;
        Ok(fit.regularized)
    }

    pub fn center(&mut self) -> Result<&DMatrix<f64>, ConfsetError> {
        if self.center.is_none() {
            self.refit()?;
        }
        Ok(self.center.as_ref().expect("centre computed"))
    }

    /// `||f_a - f_b||^2_{2,E_t}` for parameters `a` and `b`.
    pub fn empirical_distance2(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        self.data
            .iter()
            .map(|o| {
                let crate::confsets::Input::Features(phi) = &o.x else {
                    unreachable!()
                };
                (predict(&self.class, a, phi) - predict(&self.class, b, phi)).norm_squared()
            })
            .sum()
    }

    pub fn contains(&mut self, theta: &DMatrix<f64>) -> Result<bool, ConfsetError> {
        let center = self.center()?.clone();
        Ok(self.empirical_distance2(theta, &center) <= self.beta)
    }

    /// `||psi||_{V^{-1}}`.
    pub fn feature_norm(&self, phi: &DVector<f64>) -> f64 {
        let psi = regression_features(&self.class, phi);
        let v = self.design();
        let sol = v.cholesky().expect("ridge makes V positive definite").solve(&psi);
        psi.dot(&sol).max(0.0).sqrt()
    }

    /// Certified upper bound on the set width at `phi`.
    pub fn width(&self, phi: &DVector<f64>) -> f64 {
        let n = self.class.out_dim() as f64;
        let c_theta = self.class.theta_bound().expect("parametric class");
        let (scale, rank, beta_eff) = match &self.class {
            FunctionClass::Linear { class, .. } => (1.0, class.n.min(class.p) as f64, self.beta),
            FunctionClass::Quadratic { class, .. } => (1.0, class.p as f64, self.beta),
            FunctionClass::Glm { class, .. } => (
                class.h_high,
                class.n.min(class.p) as f64,
                self.beta / (class.h_low * class.h_low),
            ),
            FunctionClass::Finite(_) => unreachable!(),
        };
        let w = 2.0
            * scale
            * (2.0 * n - 1.0).sqrt()
            * (beta_eff + self.ridge * rank * c_theta * c_theta).sqrt()
            * self.feature_norm(phi);
        w.min(2.0 * self.class.c_bound())
    }

    /// Ridge-regularized solution of the normal equations, exposed for callers
    /// that only need the linear-regression centre.
    pub fn ridge_solution(&self) -> DMatrix<f64> {
        let mut cross = DMatrix::zeros(self.class.out_dim(), self.gram.nrows());
        for o in &self.data {
            let crate::confsets::Input::Features(phi) = &o.x else {
                unreachable!()
            };
            cross += &o.y * regression_features(&self.class, phi).transpose();
        }
        solve_normal_equations(&self.design(), &cross).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confsets::LinearClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_class_has_zero_width() {
        let class = FiniteClass::new(3, 1, vec![vec![0.1, 0.5, 0.9]], 1.0, 1.0).unwrap();
        let mut set = FiniteConfidenceSet::new(class);
        set.set_beta(100.0);
        set.observe(1, &[0.4]).unwrap();
        for x in 0..3 {
            assert_eq!(set.width(x), 0.0);
        }
    }

    #[test]
    fn two_members_inside_give_pairwise_width() {
        let class = FiniteClass::new(2, 1, vec![vec![0.2, 0.0], vec![0.5, 0.0]], 1.0, 1.0).unwrap();
        let mut set = FiniteConfidenceSet::new(class);
        set.set_beta(10.0);
        set.observe(1, &[0.0]).unwrap();
        assert!((set.width(0) - 0.3).abs() < 1e-15);
        assert_eq!(set.width(1), 0.0);
    }

    fn scalar_class(p: usize) -> FunctionClass {
        FunctionClass::linear(LinearClass {
            n: 1,
            p,
            c_theta: 1e3,
            c_phi: 10.0,
            c: 1e4,
            sigma: 1.0,
        })
    }

    /// For `n = 1` the set `{theta : (theta - c)^T Phi (theta - c) <= beta}`
    /// has exact width `2 sqrt(beta) ||phi||_{Phi^{-1}}`.
    #[test]
    fn scalar_width_brackets_exact_ellipsoid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let p = rng.random_range(1..4);
            let ridge = 1e-8;
            let mut set = ParametricConfidenceSet::new(scalar_class(p), ridge).unwrap();
            for _ in 0..10 {
                let phi = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
                set.observe(phi, DVector::from_vec(vec![rng.random_range(-1.0..1.0)])).unwrap();
            }
            let beta = rng.random_range(0.5..5.0);
            set.set_beta(beta);
            let phi = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let gram = set.design() - DMatrix::identity(p, p) * ridge;
            let exact = 2.0 * beta.sqrt() * phi.dot(&(gram.try_inverse().unwrap() * &phi)).sqrt();
            let w = set.width(&phi);
            assert!(w >= exact * (1.0 - 1e-9), "{w} < {exact}");
            assert!(w <= 2f64.sqrt() * exact);
        }
    }

    #[test]
    fn width_dominates_sampled_in_set_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let class = FunctionClass::linear(LinearClass {
            n: 3,
            p: 3,
            c_theta: 1.0,
            c_phi: 1.0,
            c: 1.0,
            sigma: 0.1,
        });
        let mut set = ParametricConfidenceSet::new(class, 0.01).unwrap();
        let truth = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.5 } else { 0.1 });
        for _ in 0..30 {
            let phi = DVector::from_fn(3, |_, _| rng.random_range(-0.57..0.57));
            let y = &truth * &phi + DVector::from_fn(3, |_, _| rng.random_range(-0.1..0.1));
            set.observe(phi, y).unwrap();
        }
        set.set_beta(0.5);
        let center = set.center().unwrap().clone();
        let mut inside = vec![];
        while inside.len() < 200 {
            let d = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.4..0.4));
            let theta = &center + d;
            let norm = theta.clone().svd(false, false).singular_values.max();
            if norm <= 1.0 && set.contains(&theta).unwrap() {
                inside.push(theta);
            }
        }
        for _ in 0..100 {
            let phi = DVector::from_fn(3, |_, _| rng.random_range(-0.57..0.57));
            let w = set.width(&phi);
            for a in inside.iter().step_by(7) {
                for b in inside.iter().step_by(11) {
                    assert!(((a - b) * &phi).norm() <= w + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_finite_class() {
        let class = FiniteClass::new(1, 1, vec![vec![0.0]], 1.0, 1.0).unwrap();
        assert!(ParametricConfidenceSet::new(FunctionClass::Finite(class), 1.0).is_err());
    }
}
