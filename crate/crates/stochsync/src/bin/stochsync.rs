use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochsync::cli;

/// Synchronization certificates, margins, and Monte Carlo validation for
/// networks of Lur'e systems with stochastic links.
#[derive(Parser)]
#[command(name = "stochsync", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured feasibility checks and print per-check verdicts.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compute small-gain and critical-dispersion margins.
    Margin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Sweep the scalar torus margin over (k, d) and report optima.
    Torus {
        #[arg(long)]
        config: PathBuf,
        /// Write the full sweep table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Monte Carlo simulation of the coupled network.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Write the error trace here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Analyze { config, threads } => cli::cmd_analyze(&config, threads),
        Command::Margin { config, threads } => cli::cmd_margin(&config, threads),
        Command::Torus { config, csv, threads } => cli::cmd_torus(&config, csv.as_deref(), threads),
        Command::Simulate { config, csv, threads, seed } => {
            cli::cmd_simulate(&config, csv.as_deref(), threads, seed)
        }
    };
    ExitCode::from(code as u8)
}
