//! `ksfno`: generate Kuramoto-Sivashinsky datasets, train Fourier neural operator
//! surrogates at several mode cutoffs, and compare their spectral error.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 IO.
//! `KSFNO_THREADS` caps the worker threads.

mod commands;
mod config;
mod error;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Scale;
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "ksfno", version, about = "KS data generation, FNO training and spectral error analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of (u0, u(t_final)) pairs.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per configured mode cutoff.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint path; with several cutoffs, `<stem>_m<modes>.<ext>` per model.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate checkpoints on the test split and write a report directory.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        ckpt: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG figures from a report directory.
    Plot {
        #[arg(long)]
        report: PathBuf,
    },
    /// Run generate, train, eval and plot with the configured paths.
    Reproduce {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "smoke")]
        scale: Scale,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KSFNO_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Validation(format!("KSFNO_THREADS: expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("KSFNO_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Generate { config, out } => commands::generate(&ExperimentConfig::load(&config)?, &out),
        Command::Train { config, data, out } => {
            commands::train_models(&ExperimentConfig::load(&config)?, &data, &out).map(|_| ())
        }
        Command::Eval {
            config,
            data,
            ckpt,
            out,
        } => commands::eval(&ExperimentConfig::load(&config)?, &data, &ckpt, &out).map(|_| ()),
        Command::Plot { report } => commands::plot(&report),
        Command::Reproduce { config, scale } => commands::reproduce(&ExperimentConfig::load(&config)?, scale),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ksfno: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
