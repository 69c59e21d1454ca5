use nalgebra::DVector;
use rand::Rng;

use super::{initial_value, planning_error, Agent, AgentDiagnostics, AgentError};
use crate::environments::{BoundedLqr, LinearFeedbackPolicy, LqrPlan, TabularMdp};
use crate::mdp::{plan_finite_horizon, TabularPolicy, Transition};
use crate::posteriors::{LqrPosterior, MdpPosterior, TabularPosterior};

/// Posterior sampling for tabular MDPs: one posterior draw per episode,
/// followed by exact backward induction on the draw.
#[derive(Debug, Clone)]
pub struct Psrl {
    posterior: TabularPosterior,
    sampled: Option<TabularMdp>,
    diag: AgentDiagnostics,
}

impl Psrl {
    pub fn new(posterior: TabularPosterior) -> Self {
        Self {
            posterior,
            sampled: None,
            diag: AgentDiagnostics::default(),
        }
    }

    pub fn posterior(&self) -> &TabularPosterior {
        &self.posterior
    }

    /// The MDP sampled at the start of the current episode.
    pub fn sampled_mdp(&self) -> Option<&TabularMdp> {
        self.sampled.as_ref()
    }
}

impl Agent for Psrl {
    type State = usize;
    type Action = usize;
    type Policy = TabularPolicy;

    fn name(&self) -> &'static str {
        "psrl"
    }

    fn begin_episode<R: Rng + ?Sized>(&mut self, k: usize, _t_start: usize, rng: &mut R) -> Result<TabularPolicy, AgentError> {
        let mdp = self.posterior.sample_mdp(rng);
        let (policy, value) = plan_finite_horizon(&mdp).map_err(planning_error(k))?;
        self.diag = AgentDiagnostics {
            episode: k,
            planned_value: Some(initial_value(&mdp, &value)),
            ..AgentDiagnostics::default()
        };
        self.sampled = Some(mdp);
        Ok(policy)
    }

    fn observe(&mut self, tr: &Transition<usize, usize>) -> Result<(), AgentError> {
        Ok(self.posterior.observe(&tr.state, &tr.action, tr.reward, &tr.next_state)?)
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}

/// Posterior sampling for bounded LQR with known costs: samples the dynamics
/// matrix and plays the Riccati feedback of the draw.
#[derive(Debug, Clone)]
pub struct LqrPsrl {
    posterior: LqrPosterior,
    sampled: Option<(BoundedLqr, LqrPlan)>,
    diag: AgentDiagnostics,
}

impl LqrPsrl {
    pub fn new(posterior: LqrPosterior) -> Self {
        Self {
            posterior,
            sampled: None,
            diag: AgentDiagnostics::default(),
        }
    }

    pub fn posterior(&self) -> &LqrPosterior {
        &self.posterior
    }

    pub fn sampled(&self) -> Option<&(BoundedLqr, LqrPlan)> {
        self.sampled.as_ref()
    }
}

impl Agent for LqrPsrl {
    type State = DVector<f64>;
    type Action = DVector<f64>;
    type Policy = LinearFeedbackPolicy;

    fn name(&self) -> &'static str {
        "psrl"
    }

    fn begin_episode<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        _t_start: usize,
        rng: &mut R,
    ) -> Result<LinearFeedbackPolicy, AgentError> {
        let mdp = self.posterior.sample_mdp(rng);
        let plan = mdp.riccati_plan();
        self.diag = AgentDiagnostics {
            episode: k,
            planned_value: Some(plan.value(0, mdp.initial_state())),
            ..AgentDiagnostics::default()
        };
        let policy = plan.policy();
        self.sampled = Some((mdp, plan));
        Ok(policy)
    }

    fn observe(&mut self, tr: &Transition<DVector<f64>, DVector<f64>>) -> Result<(), AgentError> {
        Ok(self.posterior.observe(&tr.state, &tr.action, tr.reward, &tr.next_state)?)
    }

    fn diagnostics(&self) -> &AgentDiagnostics {
        &self.diag
    }
}
