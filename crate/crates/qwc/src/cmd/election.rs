//! `qwc election`: run one weighted ballot-box election from a TOML config.

use std::path::PathBuf;

use clap::Args;
use qwchain::block::NodeId;
use qwchain::net::{run_election, AdversaryModel, ElectionConfig, QuantumChannel};
use qwchain::SimRng;
use rand::SeedableRng;
use serde::Deserialize;

use crate::error::{classify_net, CliError};
use crate::output::{read_text, resolve_run_dir, resolve_seed, write_json};

#[derive(Debug, Args)]
pub struct ElectionArgs {
    /// Election configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for the transcript artifact.
    #[arg(long)]
    pub out: PathBuf,
}

/// Channel knobs with library defaults, so configs only name deviations.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelOpts {
    #[serde(default = "default_decoy_rate")]
    decoy_rate: f64,
    #[serde(default = "default_decoy_dim")]
    decoy_dim: usize,
    #[serde(default = "default_error_threshold")]
    error_threshold: f64,
    #[serde(default = "default_min_decoys")]
    min_decoys: usize,
}

fn default_decoy_rate() -> f64 {
    QuantumChannel::DEFAULT_DECOY_RATE
}
fn default_decoy_dim() -> usize {
    QuantumChannel::DEFAULT_DECOY_DIM
}
fn default_error_threshold() -> f64 {
    QuantumChannel::DEFAULT_ERROR_THRESHOLD
}
fn default_min_decoys() -> usize {
    QuantumChannel::DEFAULT_MIN_DECOYS
}

impl Default for ChannelOpts {
    fn default() -> Self {
        Self {
            decoy_rate: default_decoy_rate(),
            decoy_dim: default_decoy_dim(),
            error_threshold: default_error_threshold(),
            min_decoys: default_min_decoys(),
        }
    }
}

/// On-disk election configuration
/// (example: `docs/election.example.toml`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElectionFile {
    /// Default seed; the --seed flag overrides it.
    seed: Option<u64>,
    /// Stake weight per voter; voter ids run from 0.
    weights: Vec<f64>,
    /// Candidate node ids.
    candidates: Vec<u32>,
    /// Vote quantization and ballot settings.
    vote: ElectionConfig,
    #[serde(default)]
    channel: ChannelOpts,
    #[serde(default)]
    adversary: AdversaryModel,
}

pub fn run(args: &ElectionArgs, seed: Option<u64>) -> Result<(), CliError> {
    let text = read_text(&args.config)?;
    let file: ElectionFile = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", args.config.display())))?;
    if file.weights.is_empty() {
        return Err(CliError::Usage("weights must not be empty".into()));
    }
    if file.candidates.is_empty() {
        return Err(CliError::Usage("candidates must not be empty".into()));
    }

    let seeded = seed.is_some();
    let seed = resolve_seed(seed.or(file.seed));
    let mut rng = SimRng::seed_from_u64(seed);
    let mut channel = QuantumChannel::new(
        file.channel.decoy_rate,
        file.channel.decoy_dim,
        file.channel.error_threshold,
        file.channel.min_decoys,
        file.adversary.clone(),
    )
    .map_err(classify_net)?;

    let candidates: Vec<NodeId> = file.candidates.iter().copied().map(NodeId).collect();
    let outcome = run_election(&file.weights, &candidates, &file.vote, &mut channel, &mut rng)
        .map_err(classify_net)?;

    let run_dir = resolve_run_dir(&args.out, seeded || file.seed.is_some());
    write_json(&run_dir.join("transcript.json"), &outcome.transcript)?;

    let public = &outcome.transcript.public;
    for sheet in &public.tallies {
        println!("candidate {}: tally {}", sheet.candidate, sheet.total);
    }
    let elected: Vec<String> = outcome
        .representatives
        .iter()
        .map(|n| n.to_string())
        .collect();
    println!("elected: {}", elected.join(", "));
    println!("transcript written to {}", run_dir.join("transcript.json").display());
    Ok(())
}
