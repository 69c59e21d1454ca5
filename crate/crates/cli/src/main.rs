use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use psrl_lab::harness::{execute, ExperimentConfig};

/// Run a psrl-lab experiment from a TOML config.
///
/// Exit status: 0 on success, 2 if any verification check failed, 1 on an
/// execution error.
#[derive(Debug, Parser)]
#[command(name = "psrl-lab", version)]
struct Cli {
    /// Experiment config (TOML). Built-in defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seeds base_seed..base_seed + N.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<usize>,
    /// Explicit comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Enable every verification check.
    #[arg(long)]
    verify: bool,
    /// Shrink the coverage radius by 4 (negative control; implies --verify).
    #[arg(long)]
    sabotage: bool,
    /// Comma-separated horizons for the scaling regression.
    #[arg(long, value_delimiter = ',')]
    scaling_grid: Option<Vec<usize>>,
    /// Total time steps T.
    #[arg(long)]
    total_steps: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn effective_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.seeds {
        cfg.run.seeds = n;
        cfg.run.seed_list = None;
    }
    if let Some(list) = &cli.seed_list {
        cfg.run.seed_list = Some(list.clone());
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if cli.verify || cli.sabotage {
        cfg.verify.enable_all();
    }
    if cli.sabotage {
        cfg.verify.sabotage = true;
    }
    if let Some(grid) = &cli.scaling_grid {
        cfg.run.scaling_grid = grid.clone();
    }
    if let Some(t) = cli.total_steps {
        cfg.run.total_steps = t;
    }
    if let Some(n) = cli.threads {
        cfg.run.threads = n;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = effective_config(cli)?;
    let summary = execute(&cfg)?;
    for e in &summary.seed_errors {
        eprintln!("seed {} failed: {}", e.seed, e.message);
    }
    if let Some(s) = &summary.scaling {
        eprintln!(
            "scaling slope {:.3} (95% CI {:.3} to {:.3})",
            s.slope, s.slope_ci.0, s.slope_ci.1
        );
    }
    for f in &summary.files {
        println!("{}", f.display());
    }
    Ok(summary.verification_passed.unwrap_or(true))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed; see verify.json");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
