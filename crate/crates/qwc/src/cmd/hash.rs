//! `qwc hash`: digest a file with the two-walker hash.

use std::path::PathBuf;

use clap::Args;
use qwchain::hash::{hash, HashError, HashParams};

use crate::error::CliError;
use crate::output::read_file;

#[derive(Debug, Args)]
pub struct HashArgs {
    /// File to digest.
    #[arg(long)]
    pub input: PathBuf,
    /// Cycle size of the hashing walk; the digest is cycle² bytes.
    #[arg(long, default_value_t = 8)]
    pub cycle: usize,
}

pub fn run(args: &HashArgs) -> Result<(), CliError> {
    let params = HashParams::for_cycle(args.cycle).map_err(|e| CliError::Usage(e.to_string()))?;
    let message = read_file(&args.input)?;
    let digest = hash(&message, &params).map_err(|e| match e {
        HashError::EmptyMessage => {
            CliError::Input(format!("{} is empty, nothing to digest", args.input.display()))
        }
        other => CliError::Usage(other.to_string()),
    })?;
    println!("{}", digest.to_hex());
    Ok(())
}
