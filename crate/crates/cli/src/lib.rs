//! Experiment runner: each pipeline of `drivesus-core` as a subcommand,
//! driven by a TOML config and emitting JSON or CSV.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::commands::OracleOptions;
use crate::config::ExperimentConfig;
pub use crate::error::Failure;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "drivesus", version, about = "Drive-induced relaxation simulations and fits")]
pub struct Cli {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Write `<command>.json` and `<command>.csv` here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drive coefficients and the asymptotic Bloch-Siegert shift.
    Coeffs,
    /// CW nutation trajectory and its damping and frequency.
    Nutation,
    /// Refocused decay at the configured drive strength.
    Refocus,
    /// Rate sweep over drive strengths and the parabola fit.
    Fig2,
    /// Brute-force checks of the closed forms.
    Oracle {
        #[arg(long, hide = true)]
        corrupt_kernel: bool,
    },
    /// Fit a decay (`t`,`mz`) or rate sweep (`omega1_hz`,`rz`) CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

pub fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

pub fn run(cli: &Cli, stdout: &mut impl Write) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    log::info!("config sha256 {}", cfg.digest());
    let out = match &cli.command {
        Command::Coeffs => commands::coeffs(&cfg)?,
        Command::Nutation => commands::nutation(&cfg)?,
        Command::Refocus => commands::refocus(&cfg, cli.workers)?,
        Command::Fig2 => commands::fig2(&cfg, cli.workers)?,
        Command::Oracle { corrupt_kernel } => commands::oracle(
            &cfg,
            OracleOptions {
                corrupt_kernel: *corrupt_kernel,
            },
        )?,
        Command::Fit { input } => commands::fit_file(&cfg, input)?,
    };
    out.emit(&cfg.digest(), cli.format, cli.out.as_deref(), stdout)?;
    match out.failure {
        Some(what) => Err(Failure::Tolerance(what)),
        None => Ok(()),
    }
}
