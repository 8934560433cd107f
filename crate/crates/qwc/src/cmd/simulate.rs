//! `qwc simulate`: run a full scenario (election, production rounds,
//! sync, incentives) from a TOML config.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use qwchain::block::ChainParams;
use qwchain::hash::HashParams;
use qwchain::net::{run_scenario, NetError, ScenarioConfig};
use qwchain::walk::{CoinParams, WalkConfig};

use crate::cmd::chain::write_params;
use crate::error::{classify_net, CliError};
use crate::output::{read_text, resolve_run_dir, write_json};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for run artifacts (report and chain).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let text = read_text(&args.config)?;
    let mut config = ScenarioConfig::from_toml(&text).map_err(|e| match e {
        NetError::InvalidConfig(msg) => {
            CliError::Usage(format!("bad config {}: {msg}", args.config.display()))
        }
        other => classify_net(other),
    })?;
    if let Some(seed) = seed {
        config.seed = seed;
    }

    let run_dir = resolve_run_dir(&args.out, seed.is_some());
    fs::create_dir_all(&run_dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", run_dir.display())))?;

    let report = run_scenario(&config, &run_dir).map_err(classify_net)?;
    write_json(&run_dir.join("sim_report.json"), &report)?;
    // Sidecar lets `chain-verify` re-check the persisted chain directly.
    let params = scenario_chain_params(&config)?;
    write_params(&run_dir.join("chain"), &params)?;

    let reps: Vec<String> = report.representatives.iter().map(|n| n.to_string()).collect();
    println!("seed {}: elected {}", report.seed, reps.join(", "));
    println!(
        "rounds {} ({} failed), blocks {}, sync checks {}",
        report.rounds.len(),
        report.failed_rounds.len(),
        report.chain_blocks,
        report.sync.len()
    );
    let divergent: usize = report.sync.iter().map(|s| s.divergent.len()).sum();
    if divergent > 0 {
        println!("sync divergences: {divergent}");
    }
    if !report.ledger.flagged.is_empty() {
        let flagged: Vec<String> = report.ledger.flagged.keys().map(|n| n.to_string()).collect();
        println!("flagged: {}", flagged.join(", "));
    }
    println!("artifacts written to {}", run_dir.display());
    Ok(())
}

/// The chain parameters a scenario's persisted chain was built with.
fn scenario_chain_params(config: &ScenarioConfig) -> Result<ChainParams, CliError> {
    let walk = WalkConfig::new(config.chain.position_dim, CoinParams::default())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let hash = HashParams::for_cycle(config.chain.hash_cycle)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    ChainParams::new(config.chain.walkers, config.chain.step_bound, walk, hash)
        .map_err(|e| CliError::Usage(e.to_string()))
}
