//! Statistical behaviour of the agents over many seeded runs.

use psrl_lab::agents::{run_tabular_agent, InnerSolver, Psrl, UcrlEluder};
use psrl_lab::confsets::{BetaSchedule, TabularConfidence};
use psrl_lab::harness::{run_experiment_at, tabular_prior, tabular_truth, AgentKind, EnvironmentKind, ExperimentConfig, Protocol};
use psrl_lab::mdp::plan_finite_horizon;
use psrl_lab::stats::mean_and_stderr;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn ucrl_values_stay_optimistic() {
    let cfg = ExperimentConfig::default();
    let env = &cfg.environment;
    let (runs, total_steps, delta) = (500, 300, 0.05);
    let mut optimistic_runs = 0;
    for seed in 0..runs {
        let truth = tabular_truth(&cfg, seed).unwrap();
        let (_, value) = plan_finite_horizon(&truth).unwrap();
        let v_star = truth.initial().expectation(value.step(0));
        let conf = TabularConfidence::new(
            env.n_states,
            env.n_actions,
            (0.0, 1.0),
            env.reward_noise,
            delta,
            BetaSchedule::Episode,
            total_steps,
        );
        let mut agent = UcrlEluder::new(conf, env.horizon, truth.initial().clone(), InnerSolver::ProjectedGradient);
        let mut always = true;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        run_tabular_agent(&mut agent, &truth, total_steps, &mut rng, |o| {
            let planned = o.diagnostics.planned_value.expect("ucrl reports its value");
            always &= planned >= v_star - 1e-6;
        })
        .unwrap();
        optimistic_runs += usize::from(always);
    }
    let freq = optimistic_runs as f64 / runs as f64;
    assert!(freq >= 1.0 - 2.0 * delta, "optimistic in {freq} of runs");
}

#[test]
fn epsilon_greedy_loses_to_psrl_on_river_swim() {
    let mut cfg = ExperimentConfig::default();
    cfg.environment.kind = EnvironmentKind::RiverSwim;
    cfg.run.protocol = Protocol::Fixed;
    cfg.run.seeds = 50;
    let psrl = run_experiment_at(&cfg, Some(10_000)).unwrap();
    cfg.agent.kind = AgentKind::EpsilonGreedy;
    let eg = run_experiment_at(&cfg, Some(10_000)).unwrap();
    let wins = psrl
        .runs
        .iter()
        .zip(&eg.runs)
        .filter(|(p, e)| p.cumulative_regret() < e.cumulative_regret())
        .count();
    assert!(wins >= 40, "psrl ahead on {wins} of 50 seeds");
}

#[test]
fn psrl_regret_decomposition_is_centred() {
    // Under the Bayesian protocol the sampled model's planned value and the
    // true optimal value share a distribution, so their gap averages zero.
    let cfg = ExperimentConfig::default();
    let prior = tabular_prior(&cfg).unwrap();
    let mut gaps = Vec::new();
    for seed in 0..400 {
        let truth = tabular_truth(&cfg, seed).unwrap();
        let (_, value) = plan_finite_horizon(&truth).unwrap();
        let v_star = truth.initial().expectation(value.step(0));
        let mut agent = Psrl::new(prior.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10_000);
        run_tabular_agent(&mut agent, &truth, 50, &mut rng, |o| {
            gaps.push(o.diagnostics.planned_value.expect("psrl reports its value") - v_star);
        })
        .unwrap();
    }
    let (mean, se) = mean_and_stderr(&gaps);
    assert!(mean.abs() <= 3.0 * se, "mean gap {mean} with stderr {se}");
}
