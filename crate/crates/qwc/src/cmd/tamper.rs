//! `qwc tamper-experiment`: measure how reliably validation rejects
//! mutated blocks.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use qwchain::block::{block_hash_input, validate_block, Block, ValidationMode};
use qwchain::hash::hash;
use qwchain::qudit::random_state;
use qwchain::store::ChainStore;
use qwchain::SimRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cmd::chain::load_params;
use crate::error::CliError;
use crate::output::{resolve_seed, write_json};

/// What each trial mutates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mutation {
    /// Flip one random byte in one transaction's payload, keeping the
    /// announced hashes. Detected by the digest linkage check.
    TransactionByte,
    /// Replace every final walker state with a fresh random state, keeping
    /// the classical content. Detected by the inverse-evolution check.
    StateSubstitution,
}

#[derive(Debug, Args)]
pub struct TamperArgs {
    /// Chain directory to experiment on.
    #[arg(long)]
    pub chain: PathBuf,
    /// Block index to mutate; defaults to the tip.
    #[arg(long)]
    pub block: Option<u64>,
    /// Mutation applied per trial.
    #[arg(long, value_enum, default_value_t = Mutation::TransactionByte)]
    pub mutation: Mutation,
    /// Number of independent trials.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Experiment outcome (schema: `docs/schemas/tamper_report.schema.json`).
#[derive(Debug, Serialize)]
pub struct TamperReport {
    pub mutation: String,
    pub block_index: u64,
    pub trials: usize,
    pub seed: u64,
    /// Trials where validation rejected the mutated block.
    pub rejected: usize,
    pub rejection_rate: f64,
    /// Trials caught by the digest linkage check (`own_hash` mismatch).
    pub linkage_detections: usize,
    pub linkage_rate: f64,
    /// Trials caught by the walker inverse-evolution check.
    pub internal_detections: usize,
    pub internal_rate: f64,
}

pub fn run(args: &TamperArgs, seed: Option<u64>) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let store = ChainStore::open(&args.chain).map_err(|e| CliError::Input(e.to_string()))?;
    if store.is_empty() {
        return Err(CliError::Input(format!(
            "chain at {} holds no blocks",
            args.chain.display()
        )));
    }
    let params = load_params(&args.chain)?;
    let target = args.block.unwrap_or(store.len() as u64 - 1);
    if target >= store.len() as u64 {
        return Err(CliError::Input(format!(
            "block {target} beyond chain length {}",
            store.len()
        )));
    }

    // The predecessor digest is recomputed from announced contents, exactly
    // as chain verification derives it.
    let blocks = store.blocks();
    let prev = if target == 0 {
        params.genesis_prev_hash()
    } else {
        let pred = &blocks[target as usize - 1];
        hash(
            &block_hash_input(&pred.body.transactions, pred.header.timestamp_ms),
            &params.hash,
        )
        .map_err(|e| CliError::Internal(e.to_string()))?
    };
    let block = &blocks[target as usize];

    let seed = resolve_seed(seed);
    let mut rng = SimRng::seed_from_u64(seed);
    let mode = match args.mutation {
        Mutation::TransactionByte => ValidationMode::Exact,
        Mutation::StateSubstitution => ValidationMode::Sampled,
    };

    let mut rejected = 0usize;
    let mut linkage = 0usize;
    let mut internal = 0usize;
    for _ in 0..args.trials {
        let mutated = mutate(block, args.mutation, &params.walk, &mut rng);
        let report = validate_block(&mutated, &prev, &params, mode, &mut rng)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        rejected += usize::from(!report.accepted);
        linkage += usize::from(!report.hash_match);
        internal += usize::from(report.walker_checks.iter().any(|c| !c.passed));
    }

    let rate = |count: usize| count as f64 / args.trials as f64;
    let report = TamperReport {
        mutation: match args.mutation {
            Mutation::TransactionByte => "transaction-byte".into(),
            Mutation::StateSubstitution => "state-substitution".into(),
        },
        block_index: target,
        trials: args.trials,
        seed,
        rejected,
        rejection_rate: rate(rejected),
        linkage_detections: linkage,
        linkage_rate: rate(linkage),
        internal_detections: internal,
        internal_rate: rate(internal),
    };

    println!(
        "{} on block {}: {} of {} trials rejected ({:.4})",
        report.mutation, target, rejected, args.trials, report.rejection_rate
    );
    println!(
        "  linkage detections {} ({:.4}), internal detections {} ({:.4})",
        linkage, report.linkage_rate, internal, report.internal_rate
    );
    if let Some(path) = &args.out {
        write_json(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn mutate(
    block: &Block,
    mutation: Mutation,
    walk: &qwchain::walk::WalkConfig,
    rng: &mut SimRng,
) -> Block {
    let mut mutated = block.clone();
    match mutation {
        Mutation::TransactionByte => {
            let t = rng.gen_range(0..mutated.body.transactions.len());
            let tx = &mut mutated.body.transactions[t];
            if tx.payload.is_empty() {
                // No payload byte to flip; perturb the timestamp instead.
                tx.timestamp_ms ^= u64::from(rng.gen_range(1..=255u8));
            } else {
                let pos = rng.gen_range(0..tx.payload.len());
                tx.payload[pos] ^= rng.gen_range(1..=255u8);
            }
        }
        Mutation::StateSubstitution => {
            for state in &mut mutated.body.final_states {
                *state = random_state(walk.layout(), rng);
            }
        }
    }
    mutated
}
