//! Command-line front end for the sparse sampling recovery toolkit.
//!
//! Every subcommand reads a JSON config, writes its outputs plus a manifest
//! (config hash, resolved seed, crate version) under the output directory,
//! and is bit-reproducible for a fixed config and seed. Exit codes: 0 on
//! success, 1 on assertion or certification failure, 2 on usage errors.

mod commands;
mod configs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CmdError, Ctx};

#[derive(Parser)]
#[command(
    name = "gsr",
    about = "Sparse sampling recovery: greedy algorithms over universally discretizing point sets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Output directory for reports and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: GSR_THREADS or machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random point set and write it as CSV.
    Discretize,
    /// Search for violations of the two-sided sampling-discretization
    /// property on sparse spans; exit 1 when the certificate fails.
    VerifyUsd,
    /// Estimate the restricted-isometry constant of the sampled system.
    RipCheck,
    /// Estimate incoherence (and optionally unconditionality) constants.
    Incoherence,
    /// Run the WCGA on one signal and dump the per-iteration trace.
    Recover,
    /// Recovery-rate sweep over a coefficient class, with optional linear
    /// baseline; writes CSV/JSON/SVG.
    Rates,
    /// Best-approximation ratio ensemble.
    Lebesgue,
    /// Compare WCGA errors against brute-force best v-term oracles.
    OracleCompare,
    /// Re-render the SVG plot from a stored rate table.
    Plot,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("GSR_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {}", e);
        }
    }

    let config_text = match std::fs::read_to_string(&cli.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: config {}: {}", cli.config.display(), e);
            return ExitCode::from(2);
        }
    };
    let ctx = Ctx {
        config_path: cli.config,
        config_text,
        out_dir: cli.out,
        seed_override: cli.seed,
    };

    let result = match cli.command {
        Command::Discretize => commands::discretize(&ctx),
        Command::VerifyUsd => commands::verify_usd_cmd(&ctx),
        Command::RipCheck => commands::rip_check_cmd(&ctx),
        Command::Incoherence => commands::incoherence_cmd(&ctx),
        Command::Recover => commands::recover(&ctx),
        Command::Rates => commands::rates(&ctx),
        Command::Lebesgue => commands::lebesgue(&ctx),
        Command::OracleCompare => commands::oracle_compare(&ctx),
        Command::Plot => commands::plot(&ctx),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError { code, message }) => {
            eprintln!("error: {}", message);
            ExitCode::from(code as u8)
        }
    }
}
