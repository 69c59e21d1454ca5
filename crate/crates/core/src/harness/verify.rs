use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{EnvironmentKind, ExperimentConfig};
use super::run::{tabular_prior, RunOutput};
use crate::confsets::{coverage_test_class, verify_coverage, verify_width_count, verify_width_sum, CoverageSettings};
use crate::mdp::plan_finite_horizon;
use crate::posteriors::{posterior_matching_test, random_policy_history};

/// Radius multiplier of the sabotaged coverage check (`beta / 16`, i.e. the
/// radius divided by 4).
pub const SABOTAGE_BETA_SCALE: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub observed: Value,
    pub threshold: Value,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config_hash: String,
    pub version: String,
    pub sabotage: bool,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn failure(name: &str, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: false,
        observed: Value::Null,
        threshold: Value::Null,
        detail,
    }
}

fn coverage_check(cfg: &ExperimentConfig) -> CheckResult {
    let v = &cfg.verify;
    let settings = CoverageSettings {
        truth: 0,
        noise_sigma: v.coverage_sigma,
        delta: cfg.agent.delta,
        alpha: 1.0 / (v.coverage_horizon as f64).powi(2),
        horizon: v.coverage_horizon,
        n_runs: v.coverage_runs,
        seed: cfg.run.base_seed,
        beta_scale: if v.sabotage { SABOTAGE_BETA_SCALE } else { 1.0 },
    };
    match verify_coverage(&coverage_test_class(v.coverage_sigma), settings) {
        Ok(rep) => CheckResult {
            name: "coverage".into(),
            passed: rep.passed,
            observed: json!({ "frequency": rep.frequency, "covered": rep.covered, "n_runs": rep.n_runs }),
            threshold: json!(rep.threshold),
            detail: format!(
                "8-member finite class, sigma = {}, delta = {}, T = {}{}",
                v.coverage_sigma,
                cfg.agent.delta,
                v.coverage_horizon,
                if v.sabotage { ", radius divided by 4" } else { "" }
            ),
        },
        Err(e) => failure("coverage", e.to_string()),
    }
}

fn tabular_runs<'a>(cfg: &ExperimentConfig, run: Option<&'a RunOutput>, name: &str) -> Result<&'a RunOutput, CheckResult> {
    if cfg.environment.kind == EnvironmentKind::Lqr {
        return Err(failure(name, "width checks need a tabular environment".into()));
    }
    run.ok_or_else(|| failure(name, "no run output to check".into()))
}

fn width_count_check(cfg: &ExperimentConfig, run: Option<&RunOutput>) -> CheckResult {
    let name = "width-count";
    let out = match tabular_runs(cfg, run, name) {
        Ok(o) => o,
        Err(c) => return c,
    };
    let env = &cfg.environment;
    let d_e = (env.n_states * env.n_actions) as f64;
    let mut violations = 0;
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    for seed in &out.runs {
        let (beta_r, beta_p) = seed.final_betas();
        let wr: Vec<f64> = seed.widths.iter().map(|w| w.width_r).collect();
        let wp: Vec<f64> = seed.widths.iter().map(|w| w.width_p).collect();
        for &eps in &cfg.verify.width_eps {
            for rep in [
                verify_width_count(&wr, beta_r, eps, env.horizon, d_e),
                verify_width_count(&wp, beta_p, eps, env.horizon, d_e),
            ] {
                checks += 1;
                violations += usize::from(!rep.holds);
                worst = worst.max(rep.count as f64 / rep.bound);
            }
        }
    }
    CheckResult {
        name: name.into(),
        passed: violations == 0 && checks > 0,
        observed: json!({ "violations": violations, "checks": checks, "max_count_over_bound": worst }),
        threshold: json!({ "violations": 0, "eps": cfg.verify.width_eps, "d_E": d_e }),
        detail: format!("{} seeds, reward and transition sets", out.runs.len()),
    }
}

fn width_sum_check(cfg: &ExperimentConfig, run: Option<&RunOutput>) -> CheckResult {
    let name = "width-sum";
    let out = match tabular_runs(cfg, run, name) {
        Ok(o) => o,
        Err(c) => return c,
    };
    let env = &cfg.environment;
    let d_e = (env.n_states * env.n_actions) as f64;
    let mut violations = 0;
    let mut checks = 0;
    let mut worst: f64 = 0.0;
    for seed in &out.runs {
        let (beta_r, beta_p) = seed.final_betas();
        let wr: Vec<f64> = seed.widths.iter().map(|w| w.width_r).collect();
        let wp: Vec<f64> = seed.widths.iter().map(|w| w.width_p).collect();
        // Reward widths are at most 1; transition widths at most sqrt(2).
        for rep in [
            verify_width_sum(&wr, beta_r, 1.0, env.horizon, d_e),
            verify_width_sum(&wp, beta_p, std::f64::consts::SQRT_2, env.horizon, d_e),
        ] {
            checks += 1;
            violations += usize::from(!rep.holds);
            worst = worst.max(rep.lhs / rep.rhs);
        }
    }
    CheckResult {
        name: name.into(),
        passed: violations == 0 && checks > 0,
        observed: json!({ "violations": violations, "checks": checks, "max_lhs_over_rhs": worst }),
        threshold: json!({ "violations": 0, "d_E": d_e }),
        detail: format!("{} seeds, reward and transition sets", out.runs.len()),
    }
}

fn matching_check(cfg: &ExperimentConfig) -> CheckResult {
    let name = "posterior-matching";
    if cfg.environment.kind == EnvironmentKind::Lqr {
        return failure(name, "posterior matching is implemented for tabular priors".into());
    }
    let prior = match tabular_prior(cfg) {
        Ok(p) => p,
        Err(e) => return failure(name, e.to_string()),
    };
    let v = &cfg.verify;
    let g = |m: &crate::environments::TabularMdp| {
        let (_, value) = plan_finite_horizon(m).expect("prior draws are valid MDPs");
        m.initial().expectation(value.step(0))
    };
    let rep = posterior_matching_test(
        &prior,
        &prior,
        random_policy_history(v.matching_episodes, cfg.environment.reward_noise),
        g,
        v.matching_runs,
        cfg.run.base_seed,
    );
    CheckResult {
        name: name.into(),
        passed: rep.passes(v.matching_level),
        observed: json!({ "ks_statistic": rep.ks_statistic, "p_value": rep.p_value, "n_runs": rep.n_runs,
                          "true_mean": rep.true_mean, "sampled_mean": rep.sampled_mean }),
        threshold: json!({ "p_value_above": v.matching_level }),
        detail: "statistic: optimal value at the initial state".into(),
    }
}

/// Runs the enabled checks. `run` supplies the trajectories for the width
/// checks. Failures are report entries, never errors.
pub fn verify_suite(cfg: &ExperimentConfig, run: Option<&RunOutput>) -> VerificationReport {
    let v = &cfg.verify;
    let mut checks = Vec::new();
    if v.coverage {
        checks.push(coverage_check(cfg));
    }
    if v.width_count {
        checks.push(width_count_check(cfg, run));
    }
    if v.width_sum {
        checks.push(width_sum_check(cfg, run));
    }
    if v.posterior_matching {
        checks.push(matching_check(cfg));
    }
    VerificationReport {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        sabotage: v.sabotage,
        checks,
    }
}
