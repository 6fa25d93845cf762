//! `qpr` — phase retrieval experiments from the command line.
//!
//! Exit codes: 0 success, 1 validation or analysis failure, 2 usage or
//! config parse error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "qpr", version, about = "Quantum-enhanced phase retrieval simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an input state against both uniqueness conditions.
    CheckState {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run seeded GS restarts and emit per-run CSV plus cluster summaries.
    Retrieve {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Monte-Carlo shot-noise sensitivity sweep over photon budgets.
    SweepNoise {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Build the m-mode generalized state and compare both algorithms on
    /// a random object.
    Generalize {
        /// Mode count (at least 6).
        #[arg(long, value_parser = clap::value_parser!(u64).range(6..))]
        modes: u64,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load_config(path: &PathBuf, seed_override: Option<u64>) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(mut config) => {
            if let Some(seed) = seed_override {
                config.seed = seed;
            }
            Ok(config)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            Err(ExitCode::from(2))
        }
    }
}

fn with_pool<F: FnOnce() -> anyhow::Result<()> + Send>(jobs: Option<usize>, body: F) -> anyhow::Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()?;
    pool.install(body)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::CheckState { config } => {
            let config = match load_config(&config, None) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match commands::check_state(&config) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Retrieve { config, seed, jobs, out } => {
            let config = match load_config(&config, seed) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match with_pool(jobs, || commands::retrieve(&config, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::SweepNoise { config, seed, jobs, out } => {
            let config = match load_config(&config, seed) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match with_pool(jobs, || commands::sweep_noise(&config, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Generalize { modes, runs, seed, jobs, out } => {
            match with_pool(jobs, || commands::generalize(modes as usize, runs, seed, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
