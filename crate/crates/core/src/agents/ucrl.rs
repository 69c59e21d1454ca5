use rand::Rng;

use super::inner::{max_over_simplex_ball, max_over_simplex_l1, InnerSolver};
use super::{Agent, AgentDiagnostics, AgentError};
use crate::confsets::TabularConfidence;
use crate::mdp::{InitialDistribution, TabularPolicy, Transition};

/// Optimistic planning over least-squares confidence sets for tabular MDPs.
///
/// The joint sets decouple over state-action pairs (see
/// [`TabularConfidence`]), so optimistic backward induction picks, for every
/// pair and step, the largest reward in the pair's interval and the
/// transition vector in the pair's ball that maximizes the expected next
/// value.
#[derive(Debug, Clone)]
pub struct UcrlEluder {
    conf: TabularConfidence,
    horizon: usize,
    initial: InitialDistribution,
    solver: InnerSolver,
    diag: AgentDiagnostics,
}

/// Optimistic policy with its value table and fallback counts.
#[derive(Debug, Clone)]
pub struct OptimisticPlan {
    pub policy: TabularPolicy,
    /// `values[i][s]` for `i = 0..=horizon`.
    pub values: Vec<Vec<f64>>,
    pub empty_reward_sets: usize,
    pub unconverged_inner: usize,
}

impl UcrlEluder {
    pub fn new(conf: TabularConfidence, horizon: usize, initial: InitialDistribution, solver: InnerSolver) -> Self {
        Self {
            conf,
            horizon,
            initial,
            solver,
            diag: AgentDiagnostics::default(),
        }
    }

    pub fn confidence(&self) -> &TabularConfidence {
        &self.conf
    }

    /// Optimistic backward induction at the current radii.
    pub fn optimistic_plan(&self) -> Result<OptimisticPlan, AgentError> {
        let (n, m, tau) = (self.conf.n_states(), self.conf.n_actions(), self.horizon);
        let mut values = vec![vec![0.0; n]; tau + 1];
        let mut actions = vec![0usize; n * tau];
        let mut empty = vec![false; n * m];
        let mut unconverged = 0;
        for i in (0..tau).rev() {
            let next = values[i + 1].clone();
            let top = next.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            for s in 0..n {
                let mut best = (0, f64::NEG_INFINITY);
                for a in 0..m {
                    let x = s * m + a;
                    let iv = self.conf.reward_interval(x);
                    let reward = if iv.empty {
                        empty[x] = true;
                        let (lo, hi) = self.conf.reward_range();
                        iv.center.clamp(lo, hi)
                    } else {
                        iv.hi
                    };
                    let radius = self.conf.transition_radius(x);
                    let future = if radius >= std::f64::consts::SQRT_2 {
                        // The ball contains the whole simplex.
                        top
                    } else {
                        let center = self.conf.transition_center(x);
                        let sol = match self.solver {
                            InnerSolver::ProjectedGradient => max_over_simplex_ball(&next, &center, radius),
                            InnerSolver::L1Relaxation => max_over_simplex_l1(&next, &center, (n as f64).sqrt() * radius),
                        };
                        if !sol.converged {
                            unconverged += 1;
                        }
                        sol.value
                    };
                    let q = reward + future;
                    if q > best.1 {
                        best = (a, q);
                    }
                }
                actions[i * n + s] = best.0;
                values[i][s] = best.1;
            }
        }
        Ok(OptimisticPlan {
            policy: TabularPolicy::new(n, m, tau, actions)?,
            values,
            empty_reward_sets: empty.iter().filter(|e| **e).count(),
            unconverged_inner: unconverged,
        })
    }
}

impl Agent for UcrlEluder {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        "ucrl-eluder"
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, t_start: usize, _rng: &mut R) -> Result<TabularPolicy, AgentError> {
        let betas = self.conf.advance(k, t_start)?;
        let plan = self.optimistic_plan()?;
        self.diag = AgentDiagnostics {
            episode: k,
            planned_value: Some(self.initial.expectation(&plan.values[0])),
            betas: Some(betas),
            empty_reward_sets: plan.empty_reward_sets,
            unconverged_inner: plan.unconverged_inner,
        };
        Ok(plan.policy)
    }

    fn observe(&mut self, tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        Ok(self.conf.observe(tr.state, tr.action, tr.reward, tr.next_state)?)
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}
