//! `qwc walk`: evolve a localized walker and dump the position
//! distributions before and after.

use std::path::PathBuf;

use clap::Args;
use qwchain::walk::{evolve, position_distribution, CoinParams, WalkConfig};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{to_json_text, write_json, DistributionDump};

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Cycle size (power of two).
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Starting position of the walker.
    #[arg(long)]
    pub start: usize,
    /// Number of walk steps.
    #[arg(long)]
    pub steps: u32,
    /// Coin phase ξ in radians.
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
    /// Coin angle θ in radians (π/4 is the balanced coin).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub theta: f64,
    /// Coin phase η in radians.
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Write the JSON dump here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Distributions before and after the evolution.
#[derive(Debug, Serialize)]
struct WalkDump {
    initial: DistributionDump,
    #[serde(rename = "final")]
    final_dist: DistributionDump,
}

pub fn run(args: &WalkArgs) -> Result<(), CliError> {
    let coin = CoinParams {
        xi: args.xi,
        theta: args.theta,
        eta: args.eta,
    };
    let config = WalkConfig::new(args.dim, coin).map_err(|e| CliError::Usage(e.to_string()))?;
    if args.start >= args.dim {
        return Err(CliError::Usage(format!(
            "start position {} outside cycle of size {}",
            args.start, args.dim
        )));
    }

    let initial = config
        .basis_state(args.start, 0)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let evolved = evolve(&initial, &config, args.steps)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let metadata = |label: &str| {
        json!({
            "kind": label,
            "dim": args.dim,
            "start": args.start,
            "steps": args.steps,
            "coin": { "xi": args.xi, "theta": args.theta, "eta": args.eta },
        })
    };
    let dump = WalkDump {
        initial: DistributionDump::new(
            position_distribution(&initial).map_err(|e| CliError::Internal(e.to_string()))?,
            metadata("initial"),
        ),
        final_dist: DistributionDump::new(
            position_distribution(&evolved).map_err(|e| CliError::Internal(e.to_string()))?,
            metadata("final"),
        ),
    };

    match &args.out {
        Some(path) => {
            write_json(path, &dump)?;
            println!("walk dump written to {}", path.display());
        }
        None => print!("{}", to_json_text(&dump)?),
    }
    Ok(())
}
