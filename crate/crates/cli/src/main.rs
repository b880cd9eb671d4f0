//! `gupmech`: config-driven front end for the amplitude-frequency toolkit.
//!
//! Exit codes: 0 when every stage converged, 1 when an analysis stage did
//! not, 2 for config, input or IO errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plot;

use commands::Outcome;
use config::{ExperimentConfig, Overrides, PRESETS};

#[derive(Parser)]
#[command(name = "gupmech", version, about = "Amplitude-frequency bounds on a deformed commutator")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in config: sapphire-sb, quartz-baw or atkinson-pendulum.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    preset: Option<String>,
    /// Noise seed, replacing `[noise] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, replacing `[output] directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use `[run.full_scale]` at the physical frequency.
    #[arg(long, global = true)]
    full_scale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a ringdown into timeseries.csv and metadata.toml.
    Simulate,
    /// Track, fit and bound a recorded or simulated ringdown.
    Analyze {
        /// Time series CSV as written by `simulate`.
        input: PathBuf,
    },
    /// Fit pendulum period data and bound beta0.
    Pendulum {
        /// Period CSV (theta0_rad,period_s,sigma_s); overrides `[pendulum] dataset`.
        dataset: Option<PathBuf>,
    },
    /// Collect bound reports into summary.csv and beta0_vs_mass.svg.
    Summary {
        /// Glob patterns of bound report files.
        #[arg(required = true)]
        reports: Vec<String>,
    },
    /// Vary one input over `[sweep]` values, or run a seed sweep.
    Sweep,
    /// List presets, or print one.
    Presets { name: Option<String> },
}

fn load(cli: &Cli, required: bool) -> Result<ExperimentConfig> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) if required => bail!("pass --config PATH or --preset NAME"),
        (None, None) => ExperimentConfig::parse("", "defaults")?,
    };
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        full_scale: cli.full_scale,
    };
    cfg.resolve(&overrides)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate => commands::simulate::run(&load(cli, true)?),
        Command::Analyze { input } => commands::analyze::run(&load(cli, true)?, input),
        Command::Pendulum { dataset } => commands::pendulum::run(&load(cli, true)?, dataset.as_deref()),
        Command::Summary { reports } => commands::summary::run(&load(cli, false)?, reports),
        Command::Sweep => commands::sweep::run(&load(cli, true)?),
        Command::Presets { name } => {
            match name {
                Some(n) => match PRESETS.iter().find(|(p, _)| p == n) {
                    Some((_, text)) => print!("{text}"),
                    None => bail!("unknown preset `{n}`"),
                },
                None => PRESETS.iter().for_each(|(p, _)| println!("{p}")),
            }
            Ok(Outcome::default())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) if outcome.converged() => ExitCode::SUCCESS,
        Ok(outcome) => {
            for f in &outcome.failed {
                eprintln!("not converged: {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
