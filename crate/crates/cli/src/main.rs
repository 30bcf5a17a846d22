//! `crns-explore`: build surrogate fields, run simulated exploration
//! missions, compare strategies and export variograms.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when a
//! run fails at runtime.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<crns_core::Error> for CliError {
    fn from(e: crns_core::Error) -> Self {
        use crns_core::Error as E;
        match e {
            E::Validation(_) | E::InvalidSpec(_) | E::Parse { .. } | E::Json(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "crns-explore", version, about = "Poisson-kriging exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the truth field described by `field` and write it as a grid.
    Surrogate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one mission on the configured field.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Mission length in seconds.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of `matrix` for every seed and write a report.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        /// Comma-separated seeds replacing `matrix.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the empirical and fitted variogram of a run log or of the
    /// observations named by a config.
    ExportVariogram {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        log: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        max_lag: Option<f64>,
        /// CSV file to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Surrogate { config, out } => commands::surrogate(&config, out),
        Command::Explore { config, seed, horizon, out } => commands::explore(&config, seed, horizon, out),
        Command::Compare { config, horizon, seeds, jobs, out } => commands::compare(&config, horizon, seeds, jobs, out),
        Command::ExportVariogram { log, config, bin_width, max_lag, out } => {
            commands::export_variogram(log, config, bin_width, max_lag, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crns-explore: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
