//! `tcsim`: transmission spectra and linewidth tables for qubits in a cavity.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "tcsim", version, about = "Dressed-dephasing linewidths of qubits in a microwave cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file (frequencies in linear MHz).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set system.n_qubits=3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Worker threads for frequency sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Transmission amplitude |<a>| versus probe frequency.
    Spectrum,
    /// Linewidth versus qubit number for both coupling modes.
    Fig1,
    /// Single-qubit linewidths versus resonator-qubit detuning.
    Fig2,
    /// Run the invariant checks and print a pass/fail table.
    Validate,
    /// Print the resolved configuration as JSON.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", p.display()))
        })?),
        None => None,
    };
    let mut cfg = config::load(text.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Spectrum => commands::spectrum(&cfg, &cli.out),
        Command::Fig1 => commands::fig1(&cfg, &cli.out),
        Command::Fig2 => commands::fig2(&cfg, &cli.out),
        Command::Validate => commands::validate(&cfg, &cli.out),
        Command::Config => {
            let text = serde_json::to_string_pretty(&cfg)?;
            match writeln!(std::io::stdout(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
