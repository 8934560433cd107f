//! `qwc chain-build` and `qwc chain-verify`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qwchain::block::{build_block, ChainParams, NodeId, Transaction, ValidationMode};
use qwchain::hash::HashParams;
use qwchain::store::{verify_chain, ChainStore};
use qwchain::walk::{CoinParams, WalkConfig};
use qwchain::SimRng;
use rand::{Rng, SeedableRng};

use crate::error::CliError;
use crate::output::{read_text, resolve_seed, write_json};

/// Parameter sidecar written next to the block files. The store ignores
/// files that are not `block_*.json`, so the chain directory stays openable.
pub const PARAMS_FILE: &str = "chain_params.json";

/// Validation mode flag.
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// Full-amplitude inverse-evolution check.
    Exact,
    /// One seeded position measurement per walker.
    Sampled,
}

impl From<ModeArg> for ValidationMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Exact => ValidationMode::Exact,
            ModeArg::Sampled => ValidationMode::Sampled,
        }
    }
}

pub fn write_params(dir: &Path, params: &ChainParams) -> Result<(), CliError> {
    write_json(&dir.join(PARAMS_FILE), params)
}

/// Loads the parameter sidecar, falling back to the build defaults (two
/// walkers on a 16-cycle, step bound 16, hash cycle 8) when it is absent.
pub fn load_params(dir: &Path) -> Result<ChainParams, CliError> {
    let path = dir.join(PARAMS_FILE);
    if !path.exists() {
        eprintln!(
            "note: {} not found, assuming default chain parameters",
            path.display()
        );
        return default_params();
    }
    let text = read_text(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("corrupt {}: {e}", path.display())))
}

fn default_params() -> Result<ChainParams, CliError> {
    build_params(2, 16, 16, 8)
}

fn build_params(
    walkers: usize,
    dim: usize,
    step_bound: u32,
    cycle: usize,
) -> Result<ChainParams, CliError> {
    let walk = WalkConfig::new(dim, CoinParams::default())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let hash = HashParams::for_cycle(cycle).map_err(|e| CliError::Usage(e.to_string()))?;
    ChainParams::new(walkers, step_bound, walk, hash).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Directory to create the chain in.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of blocks to build.
    #[arg(long, default_value_t = 3)]
    pub blocks: u64,
    /// Transactions per block.
    #[arg(long = "txs-per-block", default_value_t = 2)]
    pub txs_per_block: usize,
    /// Walkers per block.
    #[arg(long, default_value_t = 2)]
    pub walkers: usize,
    /// Walk cycle size (power of two).
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Step-count bound T.
    #[arg(long = "step-bound", default_value_t = 16)]
    pub step_bound: u32,
    /// Hash cycle size.
    #[arg(long, default_value_t = 8)]
    pub cycle: usize,
}

/// Builds a chain of synthetic transfers. Transaction signatures here are
/// placeholder bytes: chain validation binds content through the digest
/// linkage, while signature checking belongs to the network layer.
pub fn build(args: &BuildArgs, seed: Option<u64>) -> Result<(), CliError> {
    if args.blocks == 0 {
        return Err(CliError::Usage("--blocks must be at least 1".into()));
    }
    if args.txs_per_block == 0 {
        return Err(CliError::Usage("--txs-per-block must be at least 1".into()));
    }
    let params = build_params(args.walkers, args.dim, args.step_bound, args.cycle)?;
    let mut rng = SimRng::seed_from_u64(resolve_seed(seed));
    let mut store = ChainStore::create(&args.out).map_err(|e| CliError::Input(e.to_string()))?;

    for index in 0..args.blocks {
        let timestamp_ms = 1_000 + 1_000 * index;
        let transactions: Vec<Transaction> = (0..args.txs_per_block)
            .map(|_| random_transaction(&mut rng, timestamp_ms))
            .collect();
        let prev = store.tip_hash(&params);
        let block = build_block(&prev, index, transactions, timestamp_ms, &params)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        println!(
            "block {index}: steps {:?}, own_hash {}…",
            block.body.step_counts,
            &block.header.own_hash.to_hex()[..16]
        );
        store
            .append_block(block)
            .map_err(|e| CliError::Input(e.to_string()))?;
    }

    write_params(&args.out, &params)?;
    println!("built {} blocks at {}", args.blocks, args.out.display());
    Ok(())
}

fn random_transaction(rng: &mut SimRng, timestamp_ms: u64) -> Transaction {
    let payload_len = rng.gen_range(8..=24);
    Transaction {
        sender: NodeId(rng.gen_range(0..8)),
        receiver: NodeId(rng.gen_range(0..8)),
        payload: (0..payload_len).map(|_| rng.gen()).collect(),
        signature: (0..4).map(|_| rng.gen()).collect(),
        timestamp_ms,
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Chain directory to verify.
    #[arg(long)]
    pub chain: PathBuf,
    /// Validation mode for the walker checks.
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Write the full verification report here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(args: &VerifyArgs, seed: Option<u64>) -> Result<(), CliError> {
    let store = ChainStore::open(&args.chain).map_err(|e| CliError::Input(e.to_string()))?;
    let params = load_params(&args.chain)?;
    // Only sampled mode draws from the rng, but seeding is uniform so the
    // flag behaves the same everywhere.
    let mut rng = SimRng::seed_from_u64(seed.unwrap_or(0));
    let report = verify_chain(&store, &params, args.mode.into(), &mut rng)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    for block in &report.blocks {
        if block.report.accepted {
            println!("block {}: accepted", block.index);
        } else {
            println!("block {}: REJECTED", block.index);
            for line in &block.report.evidence {
                println!("  {line}");
            }
        }
    }
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }

    if report.accepted {
        println!("chain accepted: {} blocks", report.blocks.len());
        Ok(())
    } else {
        let failed = report.blocks.iter().filter(|b| !b.report.accepted).count();
        Err(CliError::Input(format!(
            "chain rejected: {failed} of {} blocks failed",
            report.blocks.len()
        )))
    }
}
