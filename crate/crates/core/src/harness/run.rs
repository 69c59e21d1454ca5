use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentKind, EnvironmentConfig, EnvironmentKind, ExperimentConfig, Protocol};
use super::HarnessError;
use crate::agents::{
    run_tabular_agent, Agent, EpsilonGreedy, LqrPsrl, Oracle, Psrl, TabularAgent, UcrlEluder, UniformRandom,
};
use crate::confsets::TabularConfidence;
use crate::environments::{BoundedLqr, LinearFeedbackPolicy, Noise, TabularMdp};
use crate::mdp::{rollout, EpisodicMdp, InitialDistribution, RegretRecord, Transition};
use crate::posteriors::{
    DirichletTransitionPosterior, GaussianRewardPosterior, LqrPosterior, MdpPosterior, RewardPrecision,
    TabularPosterior,
};
use crate::stats::mean_and_stderr;

/// Generator stream used to draw `M*`.
const TRUTH_STREAM: u64 = 0;
/// Generator stream used by the agent and the simulator.
const RUN_STREAM: u64 = 1;

/// One line of the regret CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    pub t_start: usize,
    pub delta_k: f64,
    pub cum_regret: f64,
    /// Sum over the episode's steps of the reward-set width at the visited
    /// pair, with the sets frozen at the episode start (NaN for LQR).
    pub width_r_sum: f64,
    pub width_p_sum: f64,
    pub beta_r: f64,
    pub beta_p: f64,
}

/// Per-step widths of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub episode: usize,
    /// Zero-based step within the episode.
    pub step: usize,
    pub width_r: f64,
    pub width_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<EpisodeRow>,
    pub widths: Vec<WidthRow>,
    /// The last episode was cut short because `tau` does not divide `T`.
    pub truncated_final_episode: bool,
    /// Episodes in which a confidence-set fallback was used.
    pub flagged_episodes: usize,
    /// Future-value Lipschitz constant of this seed's `M*` (tabular only).
    pub lipschitz: Option<f64>,
}

impl SeedRun {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// `(beta_R, beta_P)` of the last episode.
    pub fn final_betas(&self) -> (f64, f64) {
        self.rows.last().map_or((f64::NAN, f64::NAN), |r| (r.beta_r, r.beta_p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedError {
    pub seed: u64,
    pub message: String,
}

/// Seed-mean cumulative regret after each episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub episode: usize,
    /// Last time step covered by the episode.
    pub t_end: usize,
    pub mean_cum_regret: f64,
    pub stderr: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub config_hash: String,
    pub version: String,
    pub total_steps: usize,
    pub runs: Vec<SeedRun>,
    pub errors: Vec<SeedError>,
    pub aggregate: Vec<AggregateRow>,
}

impl RunOutput {
    /// Mean and standard error of the final cumulative regret.
    pub fn final_regret(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.runs.iter().map(SeedRun::cumulative_regret).collect();
        mean_and_stderr(&xs)
    }

    /// The regret CSV body: header plus rows ordered by seed list order,
    /// then episode.
    pub fn regret_csv(&self) -> String {
        let mut out = format!("# config_hash={}\n", self.config_hash);
        out.push_str("seed,episode,t_start,delta_k,cum_regret,width_R_sum,width_P_sum,beta_R,beta_P\n");
        for run in &self.runs {
            for r in &run.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.seed,
                    r.episode,
                    r.t_start,
                    r.delta_k,
                    r.cum_regret,
                    r.width_r_sum,
                    r.width_p_sum,
                    r.beta_r,
                    r.beta_p
                ));
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("# config_hash={}\n", self.config_hash);
        out.push_str("episode,t_end,mean_cum_regret,stderr,n_seeds\n");
        for r in &self.aggregate {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.episode, r.t_end, r.mean_cum_regret, r.stderr, r.n_seeds
            ));
        }
        out
    }

    /// Widths of the first successful seed.
    pub fn widths_csv(&self) -> Option<String> {
        let run = self.runs.first()?;
        let mut out = format!("# config_hash={} seed={}\n", self.config_hash, run.seed);
        out.push_str("episode,step,width_R,width_P\n");
        for w in &run.widths {
            out.push_str(&format!("{},{},{},{}\n", w.episode, w.step, w.width_r, w.width_p));
        }
        Some(out)
    }
}

fn aggregate(runs: &[SeedRun], tau: usize, total_steps: usize) -> Vec<AggregateRow> {
    let episodes = runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    (0..episodes)
        .map(|i| {
            let xs: Vec<f64> = runs.iter().filter_map(|r| r.rows.get(i)).map(|r| r.cum_regret).collect();
            let (mean, se) = mean_and_stderr(&xs);
            AggregateRow {
                episode: i + 1,
                t_end: ((i + 1) * tau).min(total_steps),
                mean_cum_regret: mean,
                stderr: se,
                n_seeds: xs.len(),
            }
        })
        .collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The prior shared by PSRL and the Bayesian protocol.
pub fn tabular_prior(cfg: &ExperimentConfig) -> Result<TabularPosterior, HarnessError> {
    let env = &cfg.environment;
    let pairs = env.n_states * env.n_actions;
    Ok(TabularPosterior::new(
        DirichletTransitionPosterior::symmetric(env.n_states, env.n_actions, cfg.prior.dirichlet)?,
        GaussianRewardPosterior::new(
            pairs,
            cfg.prior.reward_mean,
            cfg.prior.reward_var,
            RewardPrecision::Known { sigma: env.reward_noise },
        )?
        .with_support(0.0, 1.0)?,
        env.horizon,
        InitialDistribution::Point(env.initial_state),
    )?)
}

fn with_noise(mdp: &TabularMdp, noise: Noise) -> Result<TabularMdp, HarnessError> {
    Ok(TabularMdp::new(
        mdp.n_states(),
        mdp.n_actions(),
        mdp.horizon(),
        mdp.rewards().to_vec(),
        mdp.transitions().to_vec(),
        noise,
        mdp.initial().clone(),
    )?)
}

fn reward_noise(env: &EnvironmentConfig) -> Noise {
    if env.reward_noise > 0.0 {
        Noise::Gaussian { sigma: env.reward_noise }
    } else {
        Noise::None
    }
}

/// The configured fixed tabular environment.
pub fn fixed_tabular(env: &EnvironmentConfig) -> Result<TabularMdp, HarnessError> {
    let noise = reward_noise(env);
    let initial = InitialDistribution::Point(env.initial_state);
    match env.kind {
        EnvironmentKind::RiverSwim => {
            Ok(TabularMdp::river_swim(env.n_states, env.horizon, noise).with_initial(initial))
        }
        EnvironmentKind::Tabular => {
            let rewards = env.rewards.clone().unwrap_or_default();
            if rewards.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(HarnessError::Config("tabular rewards must lie in [0, 1]".into()));
            }
            let rows = env.transitions.clone().unwrap_or_default();
            Ok(TabularMdp::new(
                env.n_states,
                env.n_actions,
                env.horizon,
                rewards,
                rows.concat(),
                noise,
                initial,
            )?)
        }
        _ => Err(HarnessError::Config(format!("{:?} is not a fixed tabular environment", env.kind))),
    }
}

/// `M*` for `seed`: a prior draw under the Bayesian protocol, the configured
/// environment otherwise.
pub fn tabular_truth(cfg: &ExperimentConfig, seed: u64) -> Result<TabularMdp, HarnessError> {
    match cfg.run.protocol {
        Protocol::Bayesian => {
            let prior = tabular_prior(cfg)?;
            let draw = prior.sample_mdp(&mut rng_for(seed, TRUTH_STREAM));
            with_noise(&draw, reward_noise(&cfg.environment))
        }
        Protocol::Fixed => fixed_tabular(&cfg.environment),
    }
}

fn confidence(cfg: &ExperimentConfig, total_steps: usize) -> TabularConfidence {
    let env = &cfg.environment;
    TabularConfidence::new(
        env.n_states,
        env.n_actions,
        (0.0, 1.0),
        env.reward_noise,
        cfg.agent.delta,
        cfg.agent.beta_schedule,
        total_steps,
    )
}

fn tabular_agent(cfg: &ExperimentConfig, truth: &TabularMdp, total_steps: usize) -> Result<TabularAgent, HarnessError> {
    let env = &cfg.environment;
    let initial = InitialDistribution::Point(env.initial_state);
    Ok(match cfg.agent.kind {
        AgentKind::Psrl => TabularAgent::Psrl(Box::new(Psrl::new(tabular_prior(cfg)?))),
        AgentKind::UcrlEluder => TabularAgent::UcrlEluder(Box::new(UcrlEluder::new(
            confidence(cfg, total_steps).with_beta_scale(cfg.agent.beta_scale),
            env.horizon,
            initial,
            cfg.agent.inner_solver,
        ))),
        AgentKind::EpsilonGreedy => TabularAgent::EpsilonGreedy(Box::new(EpsilonGreedy::new(
            env.n_states,
            env.n_actions,
            env.horizon,
            cfg.agent.epsilon,
            initial,
        )?)),
        AgentKind::Oracle => TabularAgent::Oracle(Box::new(Oracle::new(truth)?)),
        AgentKind::Uniform => TabularAgent::Uniform(UniformRandom::new(env.n_states, env.n_actions, env.horizon)),
    })
}

fn run_tabular_seed(cfg: &ExperimentConfig, seed: u64, total_steps: usize) -> Result<SeedRun, HarnessError> {
    let truth = tabular_truth(cfg, seed)?;
    let mut agent = tabular_agent(cfg, &truth, total_steps)?;
    let mut shadow = confidence(cfg, total_steps);
    let m = cfg.environment.n_actions;
    let mut rows = Vec::new();
    let mut widths = Vec::new();
    let mut failure = None;
    let mut truncated = false;
    let mut flagged = 0;
    let mut cum = 0.0;
    let mut rng = rng_for(seed, RUN_STREAM);
    run_tabular_agent(&mut agent, &truth, total_steps, &mut rng, |o| {
        if failure.is_some() {
            return;
        }
        // Widths are those of the sets built from data before the episode.
        let (beta_r, beta_p) = match shadow.advance(o.episode, o.t_start) {
            Ok(b) => b,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        let (mut wr_sum, mut wp_sum) = (0.0, 0.0);
        for tr in &o.transitions {
            let x = tr.state * m + tr.action;
            let (wr, wp) = (shadow.reward_width(x), shadow.transition_width(x));
            wr_sum += wr;
            wp_sum += wp;
            widths.push(WidthRow {
                episode: o.episode,
                step: tr.step,
                width_r: wr,
                width_p: wp,
            });
        }
        for tr in &o.transitions {
            if let Err(e) = shadow.observe(tr.state, tr.action, tr.reward, tr.next_state) {
                failure = Some(e);
                return;
            }
        }
        cum += o.delta;
        truncated |= o.truncated;
        flagged += usize::from(o.diagnostics.flagged());
        rows.push(EpisodeRow {
            seed,
            episode: o.episode,
            t_start: o.t_start,
            delta_k: o.delta,
            cum_regret: cum,
            width_r_sum: wr_sum,
            width_p_sum: wp_sum,
            beta_r,
            beta_p,
        });
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(SeedRun {
        seed,
        rows,
        widths,
        truncated_final_episode: truncated,
        flagged_episodes: flagged,
        lipschitz: Some(truth.future_value_lipschitz()?),
    })
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, HarnessError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(HarnessError::Config(format!("{what} must be a nonempty rectangular array")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// The configured LQR template (the fixed `M*`, and the prior's shape).
pub fn lqr_template(env: &EnvironmentConfig) -> Result<BoundedLqr, HarnessError> {
    let b = matrix(env.dynamics.as_deref().unwrap_or_default(), "dynamics")?;
    let a = matrix(env.cost.as_deref().unwrap_or_default(), "cost")?;
    let start = match &env.start {
        Some(s) => DVector::from_vec(s.clone()),
        None => DVector::from_element(env.state_dim, 1.0),
    };
    let noise = if env.transition_noise > 0.0 {
        Noise::Gaussian {
            sigma: env.transition_noise,
        }
    } else {
        Noise::None
    };
    Ok(BoundedLqr::new(b, a, env.state_dim, noise, env.radius, env.horizon, start)?.with_reward_noise(reward_noise(env)))
}

fn run_lqr_seed(cfg: &ExperimentConfig, seed: u64, total_steps: usize) -> Result<SeedRun, HarnessError> {
    let template = lqr_template(&cfg.environment)?;
    let prior = LqrPosterior::new(template.clone(), cfg.prior.ridge)?;
    let truth = match cfg.run.protocol {
        Protocol::Bayesian => prior.sample_mdp(&mut rng_for(seed, TRUTH_STREAM)),
        Protocol::Fixed => template,
    };
    let mut psrl = LqrPsrl::new(prior);
    let oracle: LinearFeedbackPolicy = truth.riccati_plan().policy();
    let tau = truth.horizon();
    let mut rng = rng_for(seed, RUN_STREAM);
    let mut record = RegretRecord::new();
    let mut rows = Vec::new();
    for k in 1..=total_steps.div_ceil(tau) {
        let t_start = (k - 1) * tau + 1;
        let steps = tau.min(total_steps + 1 - t_start);
        let policy = match cfg.agent.kind {
            AgentKind::Psrl => psrl.begin_episode(k, t_start, &mut rng)?,
            _ => oracle.clone(),
        };
        let delta = truth.episode_regret(&policy.gains)?;
        let traj = rollout(&truth, &policy, steps, &mut rng)?;
        if cfg.agent.kind == AgentKind::Psrl {
            for (i, st) in traj.steps.iter().enumerate() {
                psrl.observe(&Transition {
                    t: t_start + i,
                    episode: k,
                    step: i,
                    state: st.state.clone(),
                    action: st.action.clone(),
                    reward: st.reward,
                    next_state: st.next_state.clone(),
                })?;
            }
        }
        let row = record.push(t_start, delta, traj.total_reward(), f64::NAN);
        rows.push(EpisodeRow {
            seed,
            episode: k,
            t_start,
            delta_k: row.delta,
            cum_regret: row.cumulative,
            width_r_sum: f64::NAN,
            width_p_sum: f64::NAN,
            beta_r: f64::NAN,
            beta_p: f64::NAN,
        });
    }
    Ok(SeedRun {
        seed,
        rows,
        widths: Vec::new(),
        truncated_final_episode: total_steps % tau != 0,
        flagged_episodes: 0,
        lipschitz: None,
    })
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, total_steps: usize) -> Result<SeedRun, HarnessError> {
    match cfg.environment.kind {
        EnvironmentKind::Lqr => run_lqr_seed(cfg, seed, total_steps),
        _ => run_tabular_seed(cfg, seed, total_steps),
    }
}

/// Runs every seed of `cfg` for `total_steps` steps (the configured `T` when
/// `None`). Seeds run in parallel and are merged in seed-list order. A seed
/// that fails is recorded and skipped; the run fails only if all seeds fail.
pub fn run_experiment_at(cfg: &ExperimentConfig, total_steps: Option<usize>) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let total_steps = total_steps.unwrap_or(cfg.run.total_steps);
    let seeds = cfg.seed_list();
    let work = || -> Vec<Result<SeedRun, HarnessError>> {
        seeds.par_iter().map(|&s| run_seed(cfg, s, total_steps)).collect()
    };
    let results = if cfg.run.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build()
            .map_err(|e| HarnessError::Io(e.to_string()))?
            .install(work)
    } else {
        work()
    };
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for (seed, res) in seeds.iter().zip(results) {
        match res {
            Ok(run) => runs.push(run),
            Err(e) => errors.push(SeedError {
                seed: *seed,
                message: e.to_string(),
            }),
        }
    }
    if runs.is_empty() {
        let first = errors.first().map_or(String::new(), |e| e.message.clone());
        return Err(HarnessError::AllSeedsFailed(first));
    }
    Ok(RunOutput {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        total_steps,
        aggregate: aggregate(&runs, cfg.environment.horizon, total_steps),
        runs,
        errors,
    })
}

/// [`run_experiment_at`] with the configured horizon.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    run_experiment_at(cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: AgentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.agent.kind = kind;
        cfg.environment.n_states = 3;
        cfg.environment.horizon = 5;
        cfg.run.total_steps = 203;
        cfg.run.seeds = 4;
        cfg
    }

    #[test]
    fn oracle_has_zero_regret_on_every_seed() {
        let out = run_experiment(&small(AgentKind::Oracle)).unwrap();
        assert_eq!(out.runs.len(), 4);
        for run in &out.runs {
            assert_eq!(run.cumulative_regret(), 0.0);
        }
    }

    #[test]
    fn episode_accounting_and_truncation() {
        let out = run_experiment(&small(AgentKind::Psrl)).unwrap();
        for run in &out.runs {
            assert_eq!(run.rows.len(), 41);
            assert!(run.truncated_final_episode);
            assert_eq!(run.widths.len(), 203);
            assert_eq!(run.rows.last().unwrap().t_start, 201);
        }
    }

    #[test]
    fn aggregate_matches_rows() {
        let out = run_experiment(&small(AgentKind::Uniform)).unwrap();
        for (i, agg) in out.aggregate.iter().enumerate() {
            let xs: Vec<f64> = out.runs.iter().map(|r| r.rows[i].cum_regret).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((agg.mean_cum_regret - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_is_deterministic_and_ordered() {
        let mut cfg = small(AgentKind::UcrlEluder);
        cfg.run.seed_list = Some(vec![9, 2, 5]);
        let a = run_experiment(&cfg).unwrap().regret_csv();
        cfg.run.threads = 1;
        let b = run_experiment(&cfg).unwrap().regret_csv();
        assert_eq!(a, b);
        let seeds: Vec<&str> = a.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(seeds.first(), Some(&"9"));
        assert_eq!(seeds.last(), Some(&"5"));
    }

    #[test]
    fn bad_seed_is_isolated() {
        let mut cfg = small(AgentKind::Psrl);
        cfg.environment.kind = EnvironmentKind::Tabular;
        cfg.run.protocol = Protocol::Fixed;
        cfg.environment.n_states = 1;
        cfg.environment.n_actions = 1;
        cfg.environment.rewards = Some(vec![2.0]);
        cfg.environment.transitions = Some(vec![vec![1.0]]);
        assert!(matches!(run_experiment(&cfg), Err(HarnessError::AllSeedsFailed(_))));
    }

    #[test]
    fn lqr_oracle_runs() {
        let mut cfg = small(AgentKind::Oracle);
        cfg.environment.kind = EnvironmentKind::Lqr;
        cfg.environment.dynamics = Some(vec![vec![1.0, 1.0]]);
        cfg.environment.cost = Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = run_experiment(&cfg).unwrap();
        for run in &out.runs {
            assert!(run.cumulative_regret().abs() < 1e-9);
            assert!(run.rows[0].beta_r.is_nan());
        }
    }
}
