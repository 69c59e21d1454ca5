use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{project_ball, Noise};
use crate::mdp::{EpisodicMdp, MdpError, Policy};

/// Ridge added to the action block of the Riccati Hessian when it is near-singular.
pub const RICCATI_RIDGE: f64 = 1e-10;

/// Linear-quadratic system with 2-norm bounded states.
///
/// With `x = (s, a)`: rewards are `-x^T A x + eps_R` and transitions are
/// `Pi_C(B x + eps_P)`, where `Pi_C` projects onto the ball of radius `C`.
/// The first `state_dim` coordinates of `x` are the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedLqr {
    dynamics: DMatrix<f64>,
    cost: DMatrix<f64>,
    state_dim: usize,
    noise: Noise,
    reward_noise: Noise,
    radius: f64,
    horizon: usize,
    initial_state: DVector<f64>,
}

/// Finite-horizon Riccati solution for the unconstrained system.
///
/// `value_matrices[i]` and `offsets[i]` give `V_i(s) = -(s^T Q_i s + c_i)` for
/// `i = 0..=horizon` (the last entries are zero). `gains[i]` is the feedback
/// `a = K_i s` at step `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrPlan {
    pub gains: Vec<DMatrix<f64>>,
    pub value_matrices: Vec<DMatrix<f64>>,
    pub offsets: Vec<f64>,
    /// True when the ridge was added to a near-singular action block.
    pub regularized: bool,
}

impl LqrPlan {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    /// Quadratic value `V_i(s) = -(s^T Q_i s + c_i)`.
    pub fn value(&self, step: usize, state: &DVector<f64>) -> f64 {
        -(state.dot(&(&self.value_matrices[step] * state)) + self.offsets[step])
    }

    /// Largest eigenvalue over all per-step value matrices.
    pub fn max_eigenvalue(&self) -> f64 {
        self.value_matrices
            .iter()
            .map(|q| {
                q.clone()
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .fold(f64::NEG_INFINITY, |m, &e| m.max(e))
            })
            .fold(0.0, f64::max)
    }

    /// Effective Lipschitz constant `2 C lambda_1` of the quadratic value on the
    /// ball of radius `radius`.
    pub fn lipschitz_constant(&self, radius: f64) -> f64 {
        2.0 * radius * self.max_eigenvalue()
    }

    pub fn policy(&self) -> LinearFeedbackPolicy {
        LinearFeedbackPolicy {
            gains: self.gains.clone(),
        }
    }
}

/// Time-varying linear state feedback `a = K_i s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFeedbackPolicy {
    pub gains: Vec<DMatrix<f64>>,
}

impl Policy<DVector<f64>, DVector<f64>> for LinearFeedbackPolicy {
    fn act<R: Rng + ?Sized>(&self, state: &DVector<f64>, step: usize, _: &mut R) -> DVector<f64> {
        &self.gains[step] * state
    }
}

fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    m.clone().symmetric_eigen().eigenvalues.iter().all(|&e| e >= -tol)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl BoundedLqr {
    pub fn new(
        dynamics: DMatrix<f64>,
        cost: DMatrix<f64>,
        state_dim: usize,
        noise: Noise,
        radius: f64,
        horizon: usize,
        initial_state: DVector<f64>,
    ) -> Result<Self, MdpError> {
        let dim = dynamics.ncols();
        if state_dim == 0 || state_dim >= dim {
            return Err(MdpError::InvalidModel(format!(
                "state dimension {state_dim} must be in 1..{dim}"
            )));
        }
        if dynamics.nrows() != state_dim {
            return Err(MdpError::DimensionMismatch {
                expected: state_dim,
                actual: dynamics.nrows(),
            });
        }
        if cost.nrows() != dim || cost.ncols() != dim {
            return Err(MdpError::DimensionMismatch {
                expected: dim,
                actual: cost.nrows(),
            });
        }
        if (&cost - cost.transpose()).amax() > 1e-12 * cost.amax().max(1.0) {
            return Err(MdpError::InvalidModel("cost matrix is not symmetric".into()));
        }
        if !is_psd(&cost, 1e-10) {
            return Err(MdpError::InvalidModel(
                "cost matrix is not positive semi-definite".into(),
            ));
        }
        if !(radius > 0.0) || horizon == 0 {
            return Err(MdpError::InvalidModel(
                "radius and horizon must be positive".into(),
            ));
        }
        if initial_state.len() != state_dim {
            return Err(MdpError::DimensionMismatch {
                expected: state_dim,
                actual: initial_state.len(),
            });
        }
        noise.validate().map_err(MdpError::InvalidModel)?;
        Ok(Self {
            dynamics,
            cost,
            state_dim,
            noise,
            reward_noise: Noise::None,
            radius,
            horizon,
            initial_state: project_ball(&initial_state, radius),
        })
    }

    pub fn with_reward_noise(mut self, noise: Noise) -> Self {
        self.reward_noise = noise;
        self
    }

    /// Same system with different dynamics (used for sampled models).
    pub fn with_dynamics(&self, dynamics: DMatrix<f64>) -> Self {
        assert_eq!(dynamics.shape(), self.dynamics.shape());
        Self {
            dynamics,
            ..self.clone()
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.dynamics.ncols() - self.state_dim
    }

    pub fn dynamics(&self) -> &DMatrix<f64> {
        &self.dynamics
    }

    pub fn cost(&self) -> &DMatrix<f64> {
        &self.cost
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    fn joint(&self, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.dynamics.ncols());
        x.rows_mut(0, self.state_dim).copy_from(s);
        x.rows_mut(self.state_dim, self.action_dim()).copy_from(a);
        x
    }

    /// `B x` before noise and projection.
    pub fn mean_next_state(&self, s: &DVector<f64>, a: &DVector<f64>) -> DVector<f64> {
        &self.dynamics * self.joint(s, a)
    }

    /// Backward Riccati recursion for `horizon` steps, ignoring the projection.
    pub fn riccati_plan(&self) -> LqrPlan {
        let (ds, da) = (self.state_dim, self.action_dim());
        let var = self.noise.variance();
        let tau = self.horizon;
        let mut q = vec![DMatrix::zeros(ds, ds); tau + 1];
        let mut c = vec![0.0; tau + 1];
        let mut gains = vec![DMatrix::zeros(da, ds); tau];
        let mut regularized = false;
        for i in (0..tau).rev() {
            let h = &self.cost + self.dynamics.transpose() * &q[i + 1] * &self.dynamics;
            let h = symmetrize(&h);
            let h_ss = h.view((0, 0), (ds, ds)).into_owned();
            let h_sa = h.view((0, ds), (ds, da)).into_owned();
            let h_as = h.view((ds, 0), (da, ds)).into_owned();
            let mut h_aa = h.view((ds, ds), (da, da)).into_owned();
            let scale = h.amax().max(1.0);
            let min_eig = h_aa
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |m, &e| m.min(e));
            if min_eig <= 1e-12 * scale {
                h_aa += DMatrix::identity(da, da) * RICCATI_RIDGE;
                regularized = true;
            }
            let chol = h_aa
                .clone()
                .cholesky()
                .or_else(|| (h_aa + DMatrix::identity(da, da) * RICCATI_RIDGE).cholesky())
                .expect("regularized action block is positive definite");
            let k = -chol.solve(&h_as);
            q[i] = symmetrize(&(h_ss + &h_sa * &k));
            c[i] = c[i + 1] + var * q[i + 1].trace();
            gains[i] = k;
        }
        LqrPlan {
            gains,
            value_matrices: q,
            offsets: c,
            regularized,
        }
    }

    /// Closed-form value `-(s^T P_i s + c_i)` of a linear feedback policy on
    /// the unconstrained system. Returns `(P_i, c_i)` for `i = 0..=horizon`.
    pub fn evaluate_feedback(
        &self,
        gains: &[DMatrix<f64>],
    ) -> Result<(Vec<DMatrix<f64>>, Vec<f64>), MdpError> {
        let (ds, da) = (self.state_dim, self.action_dim());
        if gains.len() < self.horizon {
            return Err(MdpError::DimensionMismatch {
                expected: self.horizon,
                actual: gains.len(),
            });
        }
        let var = self.noise.variance();
        let mut p = vec![DMatrix::zeros(ds, ds); self.horizon + 1];
        let mut c = vec![0.0; self.horizon + 1];
        for i in (0..self.horizon).rev() {
            let k = &gains[i];
            if k.shape() != (da, ds) {
                return Err(MdpError::DimensionMismatch {
                    expected: da * ds,
                    actual: k.len(),
                });
            }
            let mut m = DMatrix::zeros(ds + da, ds);
            m.view_mut((0, 0), (ds, ds)).fill_with_identity();
            m.view_mut((ds, 0), (da, ds)).copy_from(k);
            let f = &self.dynamics * &m;
            p[i] = symmetrize(&(m.transpose() * &self.cost * &m + f.transpose() * &p[i + 1] * &f));
            c[i] = c[i + 1] + var * p[i + 1].trace();
        }
        Ok((p, c))
    }

    /// Regret at the initial state of executing `gains` instead of the
    /// Riccati-optimal feedback, on the unconstrained system.
    pub fn episode_regret(&self, gains: &[DMatrix<f64>]) -> Result<f64, MdpError> {
        let plan = self.riccati_plan();
        let (p, c) = self.evaluate_feedback(gains)?;
        let s = &self.initial_state;
        let achieved = -(s.dot(&(&p[0] * s)) + c[0]);
        Ok(plan.value(0, s) - achieved)
    }
}

impl EpisodicMdp for BoundedLqr {
    type State = DVector<f64>;
    type Action = DVector<f64>;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn sample_initial<R: Rng + ?Sized>(&self, _: &mut R) -> DVector<f64> {
        self.initial_state.clone()
    }

    fn check_action(&self, action: &DVector<f64>) -> Result<(), MdpError> {
        if action.len() != self.action_dim() {
            return Err(MdpError::InvalidAction {
                action: format!("{:?}", action.as_slice()),
                detail: format!("expected dimension {}", self.action_dim()),
            });
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(MdpError::InvalidAction {
                action: format!("{:?}", action.as_slice()),
                detail: "non-finite component".into(),
            });
        }
        Ok(())
    }

    fn mean_reward(&self, state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let x = self.joint(state, action);
        -x.dot(&(&self.cost * &x))
    }

    fn sample_step<R: Rng + ?Sized>(
        &self,
        state: &DVector<f64>,
        action: &DVector<f64>,
        rng: &mut R,
    ) -> (f64, DVector<f64>) {
        let reward = self.mean_reward(state, action) + self.reward_noise.sample(rng);
        let next = self.mean_next_state(state, action) + self.noise.sample_vector(self.state_dim, rng);
        (reward, project_ball(&next, self.radius))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rollout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_ones(horizon: usize) -> BoundedLqr {
        BoundedLqr::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            1,
            Noise::None,
            1.0,
            horizon,
            DVector::from_vec(vec![0.5]),
        )
        .unwrap()
    }

    #[test]
    fn one_step_value_is_state_cost_block() {
        let cost = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let lqr = BoundedLqr::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 0.2, 0.0, 0.1, 0.9, 1.0]),
            cost.clone(),
            2,
            Noise::Gaussian { sigma: 0.1 },
            5.0,
            1,
            DVector::zeros(2),
        )
        .unwrap();
        let plan = lqr.riccati_plan();
        assert!((&plan.value_matrices[0] - cost.view((0, 0), (2, 2))).amax() < 1e-12);
        assert!(!plan.regularized);
    }

    #[test]
    fn scalar_riccati_reaches_golden_ratio() {
        let plan = scalar_ones(200).riccati_plan();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((plan.value_matrices[0][(0, 0)] - golden).abs() < 1e-9);
        assert!((plan.lipschitz_constant(1.0) - (1.0 + 5f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn identity_value_gives_lipschitz_two() {
        let plan = LqrPlan {
            gains: vec![],
            value_matrices: vec![DMatrix::identity(3, 3)],
            offsets: vec![0.0],
            regularized: false,
        };
        assert!((plan.lipschitz_constant(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn value_matrices_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let b = DMatrix::from_fn(2, 4, |_, _| rng.random_range(-1.0..1.0));
            let l = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let cost = &l * l.transpose();
            let lqr = BoundedLqr::new(b, cost, 2, Noise::None, 1.0, 10, DVector::zeros(2)).unwrap();
            for q in &lqr.riccati_plan().value_matrices {
                assert!(is_psd(q, 1e-9));
            }
        }
    }

    #[test]
    fn singular_action_cost_is_regularized() {
        // Zero action cost: the last-step Hessian action block is exactly zero.
        let cost = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let lqr = BoundedLqr::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            cost,
            1,
            Noise::None,
            1.0,
            3,
            DVector::zeros(1),
        )
        .unwrap();
        let plan = lqr.riccati_plan();
        assert!(plan.regularized);
        assert!(plan.value_matrices.iter().all(|q| q.iter().all(|v| v.is_finite())));
    }

    /// Two-dimensional state, scalar action, three steps, no noise: the
    /// Riccati value matches brute force over a grid of action sequences.
    #[test]
    fn riccati_matches_grid_search() {
        let b = DMatrix::from_row_slice(2, 3, &[0.9, 0.3, 0.5, -0.2, 0.8, 1.0]);
        let cost = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.4]);
        let s0 = DVector::from_vec(vec![0.8, -0.6]);
        let lqr = BoundedLqr::new(b, cost, 2, Noise::None, 1e6, 3, s0.clone()).unwrap();
        let plan = lqr.riccati_plan();
        let exact = plan.value(0, &s0);
        let grid: Vec<f64> = (0..=60).map(|i| -1.5 + 0.05 * i as f64).collect();
        let mut best = f64::NEG_INFINITY;
        for &a0 in &grid {
            for &a1 in &grid {
                for &a2 in &grid {
                    let mut s = s0.clone();
                    let mut total = 0.0;
                    for &a in &[a0, a1, a2] {
                        let a = DVector::from_vec(vec![a]);
                        total += lqr.mean_reward(&s, &a);
                        s = lqr.mean_next_state(&s, &a);
                    }
                    best = best.max(total);
                }
            }
        }
        assert!(best <= exact + 1e-12);
        // Quadratic loss from rounding each action by at most half a grid step.
        assert!(exact - best < 0.01, "grid {best} vs riccati {exact}");
    }

    #[test]
    fn quadratic_value_gap_is_lipschitz() {
        let lqr = scalar_ones(30);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = DMatrix::from_fn(2, 3, |_, _| rng.random_range(-1.0..1.0));
        let lqr2 = BoundedLqr::new(b, DMatrix::identity(3, 3), 2, Noise::None, 2.0, 10, DVector::zeros(2)).unwrap();
        for (sys, dim) in [(&lqr, 1usize), (&lqr2, 2usize)] {
            let plan = sys.riccati_plan();
            let c = sys.radius();
            let k = plan.lipschitz_constant(c);
            for _ in 0..10_000 {
                let s = project_ball(&DVector::from_fn(dim, |_, _| rng.random_range(-c..c)), c);
                let t = project_ball(&DVector::from_fn(dim, |_, _| rng.random_range(-c..c)), c);
                for q in &plan.value_matrices {
                    let gap = (s.dot(&(q * &s)) - t.dot(&(q * &t))).abs();
                    assert!(gap <= k * (&s - &t).norm() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn optimal_feedback_has_zero_regret() {
        let lqr = scalar_ones(10);
        let plan = lqr.riccati_plan();
        assert!(lqr.episode_regret(&plan.gains).unwrap().abs() < 1e-12);
        let zero = vec![DMatrix::zeros(1, 1); 10];
        assert!(lqr.episode_regret(&zero).unwrap() > 0.0);
    }

    #[test]
    fn closed_form_policy_value_matches_monte_carlo() {
        let lqr = BoundedLqr::new(
            DMatrix::from_row_slice(1, 2, &[0.9, 0.5]),
            DMatrix::identity(2, 2),
            1,
            Noise::Gaussian { sigma: 0.2 },
            1e6,
            5,
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let plan = lqr.riccati_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let returns: Vec<f64> = (0..20_000)
            .map(|_| rollout(&lqr, &plan.policy(), 5, &mut rng).unwrap().total_reward())
            .collect();
        let (m, se) = crate::stats::mean_and_stderr(&returns);
        let exact = plan.value(0, lqr.initial_state());
        assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact}");
    }

    /// Projection only removes low-reward outer states, so the projected
    /// system's value under the same feedback is at least the unconstrained one.
    #[test]
    fn projected_value_dominates_unconstrained() {
        let lqr = BoundedLqr::new(
            DMatrix::from_row_slice(2, 3, &[1.1, 0.2, 0.4, 0.0, 1.05, 0.6]),
            DMatrix::identity(3, 3),
            2,
            Noise::Gaussian { sigma: 0.6 },
            1.0,
            8,
            DVector::from_vec(vec![0.5, 0.5]),
        )
        .unwrap();
        let plan = lqr.riccati_plan();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let returns: Vec<f64> = (0..20_000)
            .map(|_| rollout(&lqr, &plan.policy(), 8, &mut rng).unwrap().total_reward())
            .collect();
        let (m, se) = crate::stats::mean_and_stderr(&returns);
        assert!(m >= plan.value(0, lqr.initial_state()) - 3.0 * se);
    }
}
