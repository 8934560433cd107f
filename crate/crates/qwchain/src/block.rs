//! Blocks whose payload is a register of quantum-walk states.
//!
//! A block's walkers start at positions carved out of the predecessor's
//! digest, walk for step counts derived from the block's transactions and
//! timestamp, and the resulting statevectors are stored alongside the
//! classical data. Validators re-derive positions and step counts from the
//! announced classical data, run the walk backwards, and check the walkers
//! land where the predecessor hash says they started; the block's own digest
//! binds the classical content.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{hash, stretch_digest, Digest, HashError, HashParams};
use crate::qudit::{QuditError, StateVector};
use crate::walk::{evolve, inverse_evolve, WalkConfig};
use crate::{qudit::MeasurementBasis, tol};

/// Identifier of a network node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "node{}", self.0)
    }
}

/// Errors from block construction, validation, and persistence.
#[derive(Debug, Error)]
pub enum ChainError {
    /// A block needs at least one transaction.
    #[error("block has no transactions")]
    EmptyBlock,
    /// Structurally broken block (wrong lengths, bad state shape, ...).
    #[error("malformed block: {0}")]
    Malformed(String),
    /// Chain store I/O or encoding failure.
    #[error("chain store error: {0}")]
    StoreError(String),
    /// Hashing failure (invalid parameters).
    #[error(transparent)]
    Hash(#[from] HashError),
    /// Statevector failure.
    #[error(transparent)]
    Qudit(#[from] QuditError),
}

/// A signed transfer. `payload` is opaque application data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: NodeId,
    pub receiver: NodeId,
    #[serde(with = "crate::store::hex_bytes")]
    pub payload: Vec<u8>,
    #[serde(with = "crate::store::hex_bytes")]
    pub signature: Vec<u8>,
    pub timestamp_ms: u64,
}

impl Transaction {
    /// Canonical byte encoding: fields in declared order, integers
    /// little-endian, variable-length fields prefixed with a `u32` length.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.payload.len() + self.signature.len());
        out.extend_from_slice(&self.sender.0.to_le_bytes());
        out.extend_from_slice(&self.receiver.0.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&(self.signature.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.timestamp_ms.to_le_bytes());
        out
    }

    /// The bytes a signature commits to: everything except the signature.
    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.payload.len());
        out.extend_from_slice(&self.sender.0.to_le_bytes());
        out.extend_from_slice(&self.receiver.0.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.timestamp_ms.to_le_bytes());
        out
    }
}

/// Canonical encoding of an ordered transaction list.
pub fn canonical_transactions(transactions: &[Transaction]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(transactions.len() as u32).to_le_bytes());
    for tx in transactions {
        out.extend_from_slice(&tx.canonical_bytes());
    }
    out
}

/// Classical block header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub index: u64,
    pub prev_hash: Digest,
    pub own_hash: Digest,
    pub timestamp_ms: u64,
}

/// Block payload: walk outcomes plus the classical data they derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBody {
    pub step_counts: Vec<u32>,
    pub final_states: Vec<StateVector>,
    pub transactions: Vec<Transaction>,
}

/// A complete block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub header: BlockHeader,
    pub body: BlockBody,
}

/// Chain-wide parameters shared by producers and validators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Number of walkers per block, `n ≥ 1`.
    pub n_walkers: usize,
    /// Step-count bound `T ≥ 1`; step counts lie in `[1, T]`.
    pub step_bound: u32,
    /// Walk instance (cycle size `M = 2^L` and coin).
    pub walk: WalkConfig,
    /// Hash instance used for block digests and position derivation.
    pub hash: HashParams,
}

impl ChainParams {
    /// Validates the parameter combination.
    pub fn new(
        n_walkers: usize,
        step_bound: u32,
        walk: WalkConfig,
        hash: HashParams,
    ) -> Result<Self, ChainError> {
        if n_walkers < 1 {
            return Err(ChainError::Malformed("n_walkers must be ≥ 1".into()));
        }
        if step_bound < 1 {
            return Err(ChainError::Malformed("step_bound must be ≥ 1".into()));
        }
        Ok(Self {
            n_walkers,
            step_bound,
            walk,
            hash,
        })
    }

    /// Cycle size `M`.
    pub fn position_dim(&self) -> usize {
        self.walk.position_dim()
    }

    /// Bits per derived position, `L = log₂ M`.
    pub fn bits_per_position(&self) -> usize {
        self.position_dim().trailing_zeros() as usize
    }

    /// The predecessor digest of the genesis block: all zeros.
    pub fn genesis_prev_hash(&self) -> Digest {
        Digest::zero(self.hash.digest_len())
    }
}

/// How the internal (inverse-evolution) check compares walker states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// Full-amplitude check: fidelity with the expected basis state must
    /// reach [`tol::VALIDATION_FIDELITY`].
    Exact,
    /// One seeded position measurement per walker, modeling the destructive
    /// physical protocol.
    Sampled,
}

/// Outcome of checking a single walker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerCheck {
    pub walker: usize,
    pub expected_position: usize,
    pub steps: u32,
    /// Fidelity with the expected basis state (exact mode only).
    pub fidelity: Option<f64>,
    /// Sampled position (sampled mode only).
    pub measured_position: Option<usize>,
    pub passed: bool,
}

/// Full validation verdict with per-check evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub accepted: bool,
    /// Header's `prev_hash` equals the expected predecessor digest.
    pub prev_hash_match: bool,
    /// Recomputed digest of the announced contents equals `own_hash`.
    pub hash_match: bool,
    pub walker_checks: Vec<WalkerCheck>,
    /// Human-readable citations of every failing check.
    pub evidence: Vec<String>,
}

/// Splits the (stretched) predecessor digest into `n` big-endian `L`-bit
/// segments, one initial position per walker.
pub fn derive_initial_positions(
    prev_hash: &Digest,
    params: &ChainParams,
) -> Result<Vec<usize>, ChainError> {
    let l = params.bits_per_position();
    let total_bits = params.n_walkers * l;
    let bits = stretch_digest(prev_hash, total_bits, &params.hash)?;
    let read_bit = |i: usize| -> usize { ((bits[i / 8] >> (7 - i % 8)) & 1) as usize };
    let mut positions = Vec::with_capacity(params.n_walkers);
    for j in 0..params.n_walkers {
        let mut x = 0usize;
        for b in 0..l {
            x = (x << 1) | read_bit(j * l + b);
        }
        positions.push(x);
    }
    Ok(positions)
}

/// Derives per-walker step counts from the canonical transaction encoding
/// and the block timestamp: `t_j = (s_j + r) mod T + 1`, where `s_j` is the
/// j-th equal-length segment of the encoding (zero-padded, read big-endian)
/// and `r` is the lowest 16 bits of the timestamp.
pub fn derive_step_counts(
    transactions: &[Transaction],
    timestamp_ms: u64,
    params: &ChainParams,
) -> Result<Vec<u32>, ChainError> {
    if transactions.is_empty() {
        return Err(ChainError::EmptyBlock);
    }
    let mut bytes = canonical_transactions(transactions);
    let n = params.n_walkers;
    let seg_len = bytes.len().div_ceil(n);
    bytes.resize(seg_len * n, 0u8);
    let t_bound = params.step_bound as u64;
    let r = timestamp_ms & 0xFFFF;
    let counts = bytes
        .chunks(seg_len)
        .map(|segment| {
            // s mod T via Horner so arbitrarily long segments need no bigint.
            let s_mod = segment
                .iter()
                .fold(0u64, |acc, &b| (acc * 256 + b as u64) % t_bound);
            ((s_mod + r) % t_bound + 1) as u32
        })
        .collect();
    Ok(counts)
}

/// Message whose digest becomes a block's `own_hash`: the canonical
/// transaction encoding followed by the little-endian timestamp.
pub fn block_hash_input(transactions: &[Transaction], timestamp_ms: u64) -> Vec<u8> {
    let mut bytes = canonical_transactions(transactions);
    bytes.extend_from_slice(&timestamp_ms.to_le_bytes());
    bytes
}

/// Builds a block on top of `prev_hash`: derive positions and step counts,
/// evolve each walker from `|x_j⟩|0⟩`, and bind the contents by digest.
pub fn build_block(
    prev_hash: &Digest,
    index: u64,
    transactions: Vec<Transaction>,
    timestamp_ms: u64,
    params: &ChainParams,
) -> Result<Block, ChainError> {
    let positions = derive_initial_positions(prev_hash, params)?;
    let step_counts = derive_step_counts(&transactions, timestamp_ms, params)?;
    let mut final_states = Vec::with_capacity(params.n_walkers);
    for (x, t) in positions.iter().zip(&step_counts) {
        let start = params.walk.basis_state(*x, 0)?;
        final_states.push(evolve(&start, &params.walk, *t)?);
    }
    let own_hash = hash(&block_hash_input(&transactions, timestamp_ms), &params.hash)?;
    Ok(Block {
        header: BlockHeader {
            index,
            prev_hash: prev_hash.clone(),
            own_hash,
            timestamp_ms,
        },
        body: BlockBody {
            step_counts,
            final_states,
            transactions,
        },
    })
}

/// Structural well-formedness, checked before any validation verdict.
fn check_well_formed(block: &Block, params: &ChainParams) -> Result<(), ChainError> {
    let n = params.n_walkers;
    if block.body.step_counts.len() != n {
        return Err(ChainError::Malformed(format!(
            "expected {n} step counts, found {}",
            block.body.step_counts.len()
        )));
    }
    if block.body.final_states.len() != n {
        return Err(ChainError::Malformed(format!(
            "expected {n} final states, found {}",
            block.body.final_states.len()
        )));
    }
    if block.body.transactions.is_empty() {
        return Err(ChainError::Malformed("block has no transactions".into()));
    }
    let m = params.position_dim();
    for (j, state) in block.body.final_states.iter().enumerate() {
        if state.layout().dims() != [m, 2] {
            return Err(ChainError::Malformed(format!(
                "walker {j} state has layout {:?}, expected [{m}, 2]",
                state.layout().dims()
            )));
        }
        if (state.norm_sq() - 1.0).abs() > tol::NORM {
            return Err(ChainError::Malformed(format!(
                "walker {j} state is not normalized"
            )));
        }
    }
    for (j, &t) in block.body.step_counts.iter().enumerate() {
        if t < 1 || t > params.step_bound {
            return Err(ChainError::Malformed(format!(
                "walker {j} step count {t} outside [1, {}]",
                params.step_bound
            )));
        }
    }
    Ok(())
}

/// Validates a block against its predecessor digest.
///
/// The internal check re-derives positions and step counts from the announced
/// classical data, inverse-evolves every stored walker state, and compares
/// against the derived start. The linkage check recomputes the content digest
/// and matches the header. Accept iff every check passes.
pub fn validate_block(
    block: &Block,
    prev_hash: &Digest,
    params: &ChainParams,
    mode: ValidationMode,
    rng: &mut impl Rng,
) -> Result<ValidationReport, ChainError> {
    check_well_formed(block, params)?;

    let mut evidence = Vec::new();

    let prev_hash_match = &block.header.prev_hash == prev_hash;
    if !prev_hash_match {
        evidence.push(format!(
            "linkage: header prev_hash {} does not match predecessor digest {}",
            block.header.prev_hash, prev_hash
        ));
    }

    let recomputed = hash(
        &block_hash_input(&block.body.transactions, block.header.timestamp_ms),
        &params.hash,
    )?;
    let hash_match = recomputed == block.header.own_hash;
    if !hash_match {
        evidence.push("linkage: recomputed own_hash does not match header".into());
    }

    let positions = derive_initial_positions(prev_hash, params)?;
    let step_counts =
        derive_step_counts(&block.body.transactions, block.header.timestamp_ms, params)?;

    let mut walker_checks = Vec::with_capacity(params.n_walkers);
    for (j, state) in block.body.final_states.iter().enumerate() {
        let expected_position = positions[j];
        let steps = step_counts[j];
        let rewound = inverse_evolve(state, &params.walk, steps)?;
        let check = match mode {
            ValidationMode::Exact => {
                let target = params.walk.basis_state(expected_position, 0)?;
                let fidelity = target.inner(&rewound)?.norm_sqr();
                WalkerCheck {
                    walker: j,
                    expected_position,
                    steps,
                    fidelity: Some(fidelity),
                    measured_position: None,
                    passed: fidelity >= tol::VALIDATION_FIDELITY,
                }
            }
            ValidationMode::Sampled => {
                let (outcome, _) =
                    rewound.measure(&[0], MeasurementBasis::Computational, rng)?;
                WalkerCheck {
                    walker: j,
                    expected_position,
                    steps,
                    fidelity: None,
                    measured_position: Some(outcome[0]),
                    passed: outcome[0] == expected_position,
                }
            }
        };
        if !check.passed {
            match mode {
                ValidationMode::Exact => evidence.push(format!(
                    "walker {j}: inverse evolution fidelity {:.3e} below threshold at position {expected_position}",
                    check.fidelity.unwrap_or(0.0)
                )),
                ValidationMode::Sampled => evidence.push(format!(
                    "walker {j}: inverse evolution measured position {}, expected {expected_position}",
                    check.measured_position.unwrap_or(usize::MAX)
                )),
            }
        }
        walker_checks.push(check);
    }

    let accepted =
        prev_hash_match && hash_match && walker_checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        accepted,
        prev_hash_match,
        hash_match,
        walker_checks,
        evidence,
    })
}
