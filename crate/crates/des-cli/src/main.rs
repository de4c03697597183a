//! `des` - operator entry point for the decision-event ledger.
//!
//! Exit codes: 0 success/compliant, 1 findings, 2 usage error.

mod commands;
mod util;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "des", version, about = "Tamper-evident decision-event ledger toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate event documents against the conditional rule set
    Validate(commands::validate::ValidateArgs),
    /// Seal drafts into per-stream hash chains in a store
    Seal(commands::seal::SealArgs),
    /// Verify stored chains and Merkle checkpoints
    Verify(commands::verify::VerifyArgs),
    /// Attach an append-only enrichment to a sealed event
    Enrich(commands::enrich::EnrichArgs),
    /// Convert an OPA decision log into decision-event drafts
    ConvertOpa(commands::convert::ConvertOpaArgs),
    /// Measure per-tier throughput and latency of the pipeline
    Bench(commands::bench::BenchArgs),
    /// Evaluate a store against a regulatory compliance profile
    Report(commands::report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => commands::validate::run(args),
        Command::Seal(args) => commands::seal::run(args),
        Command::Verify(args) => commands::verify::run(args),
        Command::Enrich(args) => commands::enrich::run(args),
        Command::ConvertOpa(args) => commands::convert::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
