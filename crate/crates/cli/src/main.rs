//! `krr-sketch`: run, verify and sweep Nyström sketches for kernel ridge
//! regression.
//!
//! Exit codes: 0 success, 1 I/O or configuration error, 2 invariant
//! violation inside the algorithm, 3 reconstruction condition failed
//! during verification.

mod commands;
mod config;
mod ingest;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{GenerateArgs, Outcome, SuggestArgs, SweepArgs, VerifyArgs};
use config::RunArgs;

#[derive(Debug, Parser)]
#[command(
    name = "krr-sketch",
    version,
    about = "Streaming Nyström sketches for kernel ridge regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stream a dataset through one algorithm and write its checkpoints
    Run(RunArgs),
    /// Re-stream a dataset and check a previous run's checkpoints
    Verify(VerifyArgs),
    /// Space budget q̄ (and batch m) from an anticipated effective dimension
    SuggestBudget(SuggestArgs),
    /// Repeat a run over consecutive seeds in parallel
    Sweep(SweepArgs),
    /// Write a synthetic clustered regression dataset
    Generate(GenerateArgs),
}

fn is_invariant(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(
            e.downcast_ref::<krr_sketch::Error>(),
            Some(krr_sketch::Error::Invariant(_))
        )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => commands::run(a),
        Command::Verify(a) => commands::verify(a),
        Command::SuggestBudget(a) => commands::suggest_budget(a).map(|_| Outcome::Ok),
        Command::Sweep(a) => commands::sweep(a),
        Command::Generate(a) => commands::generate(a).map(|_| Outcome::Ok),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ConditionFailed) => ExitCode::from(3),
        Err(e) if is_invariant(&e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
