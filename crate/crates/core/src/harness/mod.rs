//! Config-driven experiment runner: seeded parallel runs, regret and width
//! logging, scaling regression, bound reports and the verification suite.
//!
//! Every output file carries the SHA-256 hash of the effective config, and a
//! `(config, seed)` pair fully determines every byte written.

mod bound;
mod config;
mod run;
mod scaling;
mod verify;

pub use bound::{bound_output, expected_lipschitz, BoundOutput, DominanceRow, LIPSCHITZ_DRAWS};
pub use config::{
    AgentConfig, AgentKind, EnvironmentConfig, EnvironmentKind, ExperimentConfig, OutputConfig, PriorConfig,
    Protocol, RunConfig, VerifyConfig,
};
pub use run::{
    fixed_tabular, lqr_template, run_experiment, run_experiment_at, tabular_prior, tabular_truth, AggregateRow,
    EpisodeRow, RunOutput, SeedError, SeedRun, WidthRow,
};
pub use scaling::{scaling_regression, ScalingReport};
pub use verify::{verify_suite, CheckResult, VerificationReport, SABOTAGE_BETA_SCALE};

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::agents::AgentError;
use crate::confsets::ConfsetError;
use crate::eluder::EluderError;
use crate::mdp::MdpError;
use crate::posteriors::PosteriorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("every seed failed; first error: {0}")]
    AllSeedsFailed(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Confset(#[from] ConfsetError),
    #[error(transparent)]
    Eluder(#[from] EluderError),
}

/// What [`execute`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionSummary {
    pub files: Vec<PathBuf>,
    /// `None` when no check was enabled.
    pub verification_passed: Option<bool>,
    pub seed_errors: Vec<SeedError>,
    pub scaling: Option<ScalingReport>,
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Runs the experiment described by `cfg` and writes every output under
/// `cfg.output.dir`:
///
/// - `config.toml`: the effective config;
/// - `regret.csv` (or `regret_T<T>.csv` per scaling horizon) and
///   `regret_summary.csv`;
/// - `widths.csv` for the first seed of tabular runs;
/// - `bound.json`, `scaling.json`, `verify.json` when enabled;
/// - `run.json`: per-seed status, aggregate regret and file list.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExecutionSummary, HarnessError> {
    cfg.validate()?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let hash = cfg.hash();
    let mut files = Vec::new();
    write(dir, "config.toml", &format!("# config_hash={hash}\n{}", cfg.to_toml()), &mut files)?;

    let mut grid = cfg.run.scaling_grid.clone();
    grid.sort_unstable();
    grid.dedup();
    let mut measured = Vec::new();
    let mut scaling = None;
    let main = if grid.is_empty() {
        let out = run_experiment(cfg)?;
        write(dir, "regret.csv", &out.regret_csv(), &mut files)?;
        let (m, se) = out.final_regret();
        measured.push((out.total_steps, m, se));
        out
    } else {
        let mut last = None;
        for &t in &grid {
            let out = run_experiment_at(cfg, Some(t))?;
            write(dir, &format!("regret_T{t}.csv"), &out.regret_csv(), &mut files)?;
            let (m, se) = out.final_regret();
            measured.push((t, m, se));
            last = Some(out);
        }
        let points: Vec<(f64, f64)> = measured.iter().map(|&(t, m, _)| (t as f64, m)).collect();
        let report = scaling_regression(&points)?;
        write(
            dir,
            "scaling.json",
            &to_json(&json!({ "config_hash": hash, "version": env!("CARGO_PKG_VERSION"), "report": report,
                              "measured": measured })),
            &mut files,
        )?;
        scaling = Some(report);
        last.expect("grid is nonempty")
    };
    write(dir, "regret_summary.csv", &main.summary_csv(), &mut files)?;
    if cfg.output.widths && cfg.environment.kind != EnvironmentKind::Lqr {
        if let Some(body) = main.widths_csv() {
            write(dir, "widths.csv", &body, &mut files)?;
        }
    }
    if cfg.output.bound {
        let horizons: Vec<usize> = measured.iter().map(|m| m.0).collect();
        let bound = bound_output(cfg, &horizons, &measured)?;
        write(dir, "bound.json", &to_json(&bound), &mut files)?;
    }
    let mut verification_passed = None;
    if cfg.verify.any() {
        let report = verify_suite(cfg, Some(&main));
        verification_passed = Some(report.passed());
        write(dir, "verify.json", &to_json(&report), &mut files)?;
    }
    let seeds: Vec<_> = main
        .runs
        .iter()
        .map(|r| {
            json!({ "seed": r.seed, "status": "ok", "episodes": r.rows.len(),
                    "cumulative_regret": r.cumulative_regret(),
                    "truncated_final_episode": r.truncated_final_episode,
                    "flagged_episodes": r.flagged_episodes, "lipschitz": r.lipschitz })
        })
        .collect();
    let (mean, se) = main.final_regret();
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .chain(std::iter::once("run.json".to_string()))
        .collect();
    let run_json = json!({
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "total_steps": main.total_steps,
        "seeds": seeds,
        "errors": main.errors,
        "mean_cumulative_regret": mean,
        "stderr": se,
        "files": names,
    });
    write(dir, "run.json", &to_json(&run_json), &mut files)?;
    Ok(ExecutionSummary {
        files,
        verification_passed,
        seed_errors: main.errors.clone(),
        scaling,
    })
}
