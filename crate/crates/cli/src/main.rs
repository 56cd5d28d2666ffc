use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridshift_cli::commands::{self, Flags};
use gridshift_cli::config::{env_overrides, RunConfig};
use gridshift_cli::Failure;

#[derive(Debug, Parser)]
#[command(name = "gridshift", version, about = "Renewable displacement of thermal-plant emissions")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "gridshift.toml")]
    config: PathBuf,
    /// Worker threads; overrides `workers` in the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known truth.
    Simulate,
    /// Panel fits per region and dependent variable.
    Fit {
        /// Also run the Δ-offset sensitivity sweep.
        #[arg(long)]
        delta_sweep: bool,
        /// Drop zero-generation rows instead of offsetting them.
        #[arg(long)]
        drop_zero_rows: bool,
        /// Also fit per-plant models.
        #[arg(long)]
        plants: bool,
    },
    /// Per-plant fits and fuel-group summaries.
    Plants,
    /// Displacement effectiveness, displaced mass and concentration.
    Displacement,
    /// Percentile-intensity emissions scenarios.
    Scenario {
        /// Use the 5th/95th percentiles.
        #[arg(long)]
        appendix: bool,
    },
    /// The full pipeline, simulating inputs when none are configured.
    Report {
        #[arg(long)]
        delta_sweep: bool,
        #[arg(long)]
        drop_zero_rows: bool,
        #[arg(long)]
        appendix: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&cli.config, env_overrides())?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .map_err(|e| Failure::config(format!("workers: {e}")))?;
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Fit {
            delta_sweep,
            drop_zero_rows,
            plants,
        } => commands::cmd_fit(
            &cfg,
            Flags {
                delta_sweep,
                drop_zero_rows,
                plants,
                ..Flags::default()
            },
        ),
        Command::Plants => commands::cmd_plants(&cfg),
        Command::Displacement => commands::cmd_displacement(&cfg),
        Command::Scenario { appendix } => commands::cmd_scenario(&cfg, appendix),
        Command::Report {
            delta_sweep,
            drop_zero_rows,
            appendix,
        } => commands::cmd_report(
            &cfg,
            Flags {
                delta_sweep,
                drop_zero_rows,
                appendix,
                plants: true,
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("gridshift: {f}");
            ExitCode::from(f.code)
        }
    }
}
