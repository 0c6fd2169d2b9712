//! `l12prox` command-line harness.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 for usage and I/O
//! errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "l12prox", version, about = "Closed-form l1-2 prox experiments and checks")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct GlobalArgs {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Directory for result files (created if missing).
    #[arg(long, global = true, default_value = "./out")]
    pub out_dir: PathBuf,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compressed-sensing comparison of the five solvers.
    Cs(commands::cs::CsArgs),
    /// Matrix completion with the nuclear-minus-Frobenius penalty.
    Matcomp(commands::matcomp::MatcompArgs),
    /// TV l1-2 denoising over a grid of lambda values.
    Tv(commands::tv::TvArgs),
    /// Randomized checks of the closed-form prox against brute force.
    Proxcheck(commands::proxcheck::ProxcheckArgs),
}

/// How a command finished when it did not hit an error.
pub enum Outcome {
    Success,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cs(a) => commands::cs::run(a, &cli.global),
        Command::Matcomp(a) => commands::matcomp::run(a, &cli.global),
        Command::Tv(a) => commands::tv::run(a, &cli.global),
        Command::Proxcheck(a) => commands::proxcheck::run(a, &cli.global),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
