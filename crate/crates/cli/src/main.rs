//! `dampcert`: check assumptions, derive thresholds, simulate and certify
//! stability of the null solution for a problem described in a TOML file.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (all assumptions hold / every certificate passed) |
//! | 1 | configuration error, refused precondition, or I/O failure |
//! | 2 | an assumption on the problem is violated |
//! | 3 | the solver failed (non-convergence or non-finite state) |
//! | 4 | at least one certificate did not pass |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Loaded, Overrides};

#[derive(Parser)]
#[command(name = "dampcert", version, about = "Stability certificates for damped third-order semilinear PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the assumptions on the problem coefficients
    Check(#[command(flatten)] Args),
    /// Derive every threshold constant
    Thresholds(#[command(flatten)] Args),
    /// Integrate the configured initial data and write the trajectory
    Simulate(#[command(flatten)] Args),
    /// Run the configured certificates
    Certify(#[command(flatten)] Args),
    /// Run certificates over sigmas × t0s × shapes in parallel
    Sweep(#[command(flatten)] Args),
}

#[derive(clap::Args, Clone)]
struct Args {
    /// TOML run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides [output].directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweep
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Checked interval length (certify, sweep) or run length (simulate)
    #[arg(long, value_name = "T")]
    horizon: Option<f64>,
    /// Seed for the random shapes of [certify]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Check(args) | Command::Thresholds(args) | Command::Simulate(args) | Command::Certify(args) | Command::Sweep(args)) = &cli.command;
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = Overrides { out: args.out.clone(), horizon: args.horizon, seed: args.seed };
    let cfg = match Loaded::load(&args.config, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Check(_) => commands::check(&cfg),
        Command::Thresholds(_) => commands::thresholds(&cfg),
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Certify(_) => commands::certify(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
