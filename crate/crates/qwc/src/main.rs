//! `qwc`: command line front end for the quantum-walk chain simulator.
//!
//! Exit codes are a stable contract: 0 success, 2 usage or configuration
//! error, 3 missing or corrupt input, 4 protocol abort.

mod cmd;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qwc", version, about = "Quantum-walk chain simulator")]
struct Cli {
    /// Seed for every random choice; fixes outputs byte for byte and
    /// disables timestamped run subdirectories.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Digest a file with the two-walker hash.
    Hash(cmd::hash::HashArgs),
    /// Evolve a localized walker and dump its position distributions.
    Walk(cmd::walk::WalkArgs),
    /// Build a chain of synthetic transactions.
    ChainBuild(cmd::chain::BuildArgs),
    /// Verify a stored chain block by block.
    ChainVerify(cmd::chain::VerifyArgs),
    /// Measure rejection rates for mutated blocks.
    TamperExperiment(cmd::tamper::TamperArgs),
    /// Run one weighted election from a TOML config.
    Election(cmd::election::ElectionArgs),
    /// Run a full network scenario from a TOML config.
    Simulate(cmd::simulate::SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match &cli.command {
        Command::Hash(args) => cmd::hash::run(args),
        Command::Walk(args) => cmd::walk::run(args),
        Command::ChainBuild(args) => cmd::chain::build(args, cli.seed),
        Command::ChainVerify(args) => cmd::chain::verify(args, cli.seed),
        Command::TamperExperiment(args) => cmd::tamper::run(args, cli.seed),
        Command::Election(args) => cmd::election::run(args, cli.seed),
        Command::Simulate(args) => cmd::simulate::run(args, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
