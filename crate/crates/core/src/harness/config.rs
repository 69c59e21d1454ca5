use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::agents::InnerSolver;
use crate::confsets::BetaSchedule;

/// Which environment family an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnvironmentKind {
    /// Dimensions only; every seed draws `M*` from the prior.
    #[default]
    Prior,
    RiverSwim,
    /// Explicit reward vector and transition rows.
    Tabular,
    Lqr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub kind: EnvironmentKind,
    pub n_states: usize,
    pub n_actions: usize,
    /// Episode length `tau`.
    pub horizon: usize,
    /// Standard deviation of Gaussian reward noise.
    pub reward_noise: f64,
    /// Tabular: mean rewards indexed `s * A + a`.
    pub rewards: Option<Vec<f64>>,
    /// Tabular: one row per pair `s * A + a`.
    pub transitions: Option<Vec<Vec<f64>>>,
    /// Tabular: initial state.
    pub initial_state: usize,
    /// LQR: `B`, `state_dim x (state_dim + action_dim)`.
    pub dynamics: Option<Vec<Vec<f64>>>,
    /// LQR: `A`, symmetric positive semi-definite.
    pub cost: Option<Vec<Vec<f64>>>,
    pub state_dim: usize,
    /// LQR: standard deviation of Gaussian transition noise.
    pub transition_noise: f64,
    /// LQR: state-norm bound `C`.
    pub radius: f64,
    /// LQR: starting state.
    pub start: Option<Vec<f64>>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            kind: EnvironmentKind::Prior,
            n_states: 6,
            n_actions: 2,
            horizon: 10,
            reward_noise: 0.1,
            rewards: None,
            transitions: None,
            initial_state: 0,
            dynamics: None,
            cost: None,
            state_dim: 1,
            transition_noise: 0.1,
            radius: 10.0,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    #[default]
    Psrl,
    UcrlEluder,
    EpsilonGreedy,
    Oracle,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Exploration rate of the epsilon-greedy baseline.
    pub epsilon: f64,
    /// Confidence level of the UCRL sets and the diagnostic widths.
    pub delta: f64,
    pub beta_schedule: BetaSchedule,
    pub inner_solver: InnerSolver,
    /// Multiplier on the UCRL radii.
    pub beta_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Psrl,
            epsilon: 0.1,
            delta: 0.05,
            beta_schedule: BetaSchedule::Episode,
            inner_solver: InnerSolver::ProjectedGradient,
            beta_scale: 1.0,
        }
    }
}

/// Prior used by PSRL and, under the Bayesian protocol, to draw `M*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Symmetric Dirichlet concentration of every transition row.
    pub dirichlet: f64,
    /// Gaussian prior on each mean reward, truncated to `[0, 1]`.
    pub reward_mean: f64,
    pub reward_var: f64,
    /// LQR: ridge of the Gaussian prior on the dynamics rows.
    pub ridge: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            dirichlet: 1.0,
            reward_mean: 0.5,
            reward_var: 1.0,
            ridge: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// `M*` is redrawn per seed from the prior the agent uses.
    #[default]
    Bayesian,
    /// `M*` is the configured environment for every seed; the agent prior is
    /// unchanged. Exploratory only: the regret bound does not apply.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Total time steps `T`.
    pub total_steps: usize,
    /// Number of seeds, starting at `base_seed`. Ignored if `seed_list` is set.
    pub seeds: usize,
    pub base_seed: u64,
    pub seed_list: Option<Vec<u64>>,
    pub protocol: Protocol,
    /// Horizons for the scaling regression; empty runs only `total_steps`.
    pub scaling_grid: Vec<usize>,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            total_steps: 10_000,
            seeds: 10,
            base_seed: 0,
            seed_list: None,
            protocol: Protocol::Bayesian,
            scaling_grid: Vec::new(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub coverage: bool,
    pub width_count: bool,
    pub width_sum: bool,
    pub posterior_matching: bool,
    /// Shrinks the coverage radius by 4 (negative control).
    pub sabotage: bool,
    pub width_eps: Vec<f64>,
    pub coverage_runs: usize,
    pub coverage_horizon: usize,
    pub coverage_sigma: f64,
    pub matching_runs: usize,
    /// Random-policy episodes observed before the posterior draw.
    pub matching_episodes: usize,
    /// KS p-value above which the matching check passes.
    pub matching_level: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            coverage: false,
            width_count: false,
            width_sum: false,
            posterior_matching: false,
            sabotage: false,
            width_eps: vec![0.05, 0.1, 0.2],
            coverage_runs: 2000,
            coverage_horizon: 500,
            coverage_sigma: 1.0,
            matching_runs: 5000,
            matching_episodes: 5,
            matching_level: 0.01,
        }
    }
}

impl VerifyConfig {
    pub fn any(&self) -> bool {
        self.coverage || self.width_count || self.width_sum || self.posterior_matching
    }

    pub fn enable_all(&mut self) {
        self.coverage = true;
        self.width_count = true;
        self.width_sum = true;
        self.posterior_matching = true;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write the regret-bound report.
    pub bound: bool,
    /// Write per-step widths of the first seed.
    pub widths: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            bound: true,
            widths: true,
        }
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub agent: AgentConfig,
    pub prior: PriorConfig,
    pub run: RunConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Seeds in run order.
    pub fn seed_list(&self) -> Vec<u64> {
        match &self.run.seed_list {
            Some(list) => list.clone(),
            None => (0..self.run.seeds as u64).map(|i| self.run.base_seed + i).collect(),
        }
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory
    /// and thread count so that moving or parallelizing a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output.dir = PathBuf::new();
        canon.run.threads = 0;
        let json = serde_json::to_string(&canon).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let env = &self.environment;
        if env.horizon == 0 {
            return bad("environment.horizon must be positive".into());
        }
        if self.run.total_steps == 0 {
            return bad("run.total_steps must be positive".into());
        }
        if self.seed_list().is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(env.reward_noise >= 0.0) {
            return bad(format!("reward_noise must be nonnegative, got {}", env.reward_noise));
        }
        let a = &self.agent;
        if !(a.delta > 0.0 && a.delta < 1.0) {
            return bad(format!("agent.delta must lie in (0, 1), got {}", a.delta));
        }
        if !(0.0..=1.0).contains(&a.epsilon) {
            return bad(format!("agent.epsilon must lie in [0, 1], got {}", a.epsilon));
        }
        if !(a.beta_scale > 0.0) {
            return bad(format!("agent.beta_scale must be positive, got {}", a.beta_scale));
        }
        match env.kind {
            EnvironmentKind::Lqr => {
                if !matches!(a.kind, AgentKind::Psrl | AgentKind::Oracle) {
                    return bad("lqr environments support the psrl and oracle agents only".into());
                }
                if env.dynamics.is_none() || env.cost.is_none() {
                    return bad("lqr environments need dynamics and cost".into());
                }
            }
            EnvironmentKind::RiverSwim if env.n_actions != 2 || env.n_states < 2 => {
                return bad("river-swim needs n_actions = 2 and n_states >= 2".into());
            }
            EnvironmentKind::Tabular if env.rewards.is_none() || env.transitions.is_none() => {
                return bad("tabular environments need rewards and transitions".into());
            }
            _ => {}
        }
        if env.kind == EnvironmentKind::Prior && self.run.protocol == Protocol::Fixed {
            return bad("the prior environment needs the bayesian protocol".into());
        }
        if env.kind != EnvironmentKind::Lqr && (env.n_states == 0 || env.n_actions == 0) {
            return bad("n_states and n_actions must be positive".into());
        }
        let needs_prior = a.kind == AgentKind::Psrl || self.run.protocol == Protocol::Bayesian;
        if needs_prior && env.kind != EnvironmentKind::Lqr && !(env.reward_noise > 0.0) {
            return bad("the tabular prior needs reward_noise > 0 for its Gaussian likelihood".into());
        }
        if self.prior.dirichlet <= 0.0 || self.prior.reward_var <= 0.0 || self.prior.ridge <= 0.0 {
            return bad("prior parameters must be positive".into());
        }
        for &t in &self.run.scaling_grid {
            if t == 0 {
                return bad("scaling grid entries must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.agent.kind = AgentKind::UcrlEluder;
        cfg.environment.kind = EnvironmentKind::RiverSwim;
        cfg.run.protocol = Protocol::Fixed;
        cfg.run.seed_list = Some(vec![3, 1, 4]);
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.seed_list(), vec![3, 1, 4]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[run]\ntotal_step = 10\n").is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.run.total_steps += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation_catches_bad_combinations() {
        let mut cfg = ExperimentConfig::default();
        cfg.run.protocol = Protocol::Fixed;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.environment.kind = EnvironmentKind::Lqr;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.agent.delta = 1.0;
        assert!(cfg.validate().is_err());
    }
}
