//! Directory-backed chain persistence.
//!
//! A chain is a directory of numbered files `block_000000.json`,
//! `block_000001.json`, ... — one block each. Headers carry digests as
//! lowercase hex; statevectors are stored as their subsystem dims plus a
//! list of `[re, im]` amplitude pairs, which round-trips `f64` exactly.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::block::{
    validate_block, Block, BlockBody, BlockHeader, ChainError, ChainParams, Transaction,
    ValidationMode, ValidationReport,
};
use crate::hash::{hash, Digest};
use crate::qudit::{StateVector, SubsystemLayout};

/// Serde adapter: byte strings as lowercase hex.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// On-disk form of a statevector.
#[derive(Debug, Serialize, Deserialize)]
struct StoredState {
    dims: Vec<usize>,
    amplitudes: Vec<(f64, f64)>,
}

impl StoredState {
    fn from_state(state: &StateVector) -> Self {
        Self {
            dims: state.layout().dims().to_vec(),
            amplitudes: state.amplitudes().iter().map(|a| (a.re, a.im)).collect(),
        }
    }

    fn into_state(self) -> Result<StateVector, ChainError> {
        let layout = SubsystemLayout::new(&self.dims)
            .map_err(|e| ChainError::StoreError(format!("bad state layout: {e}")))?;
        let amps = self
            .amplitudes
            .into_iter()
            .map(|(re, im)| Complex64::new(re, im))
            .collect();
        StateVector::from_amplitudes(layout, amps)
            .map_err(|e| ChainError::StoreError(format!("bad state amplitudes: {e}")))
    }
}

/// On-disk form of a block (schema: `docs/schemas/block.schema.json`).
#[derive(Debug, Serialize, Deserialize)]
struct StoredBlock {
    header: BlockHeader,
    step_counts: Vec<u32>,
    final_states: Vec<StoredState>,
    transactions: Vec<Transaction>,
}

/// Encodes a block to the persistent JSON schema.
pub fn block_to_json(block: &Block) -> Result<String, ChainError> {
    let stored = StoredBlock {
        header: block.header.clone(),
        step_counts: block.body.step_counts.clone(),
        final_states: block
            .body
            .final_states
            .iter()
            .map(StoredState::from_state)
            .collect(),
        transactions: block.body.transactions.clone(),
    };
    serde_json::to_string_pretty(&stored).map_err(|e| ChainError::StoreError(e.to_string()))
}

/// Decodes a block from the persistent JSON schema.
pub fn block_from_json(json: &str) -> Result<Block, ChainError> {
    let stored: StoredBlock =
        serde_json::from_str(json).map_err(|e| ChainError::StoreError(e.to_string()))?;
    let final_states = stored
        .final_states
        .into_iter()
        .map(StoredState::into_state)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Block {
        header: stored.header,
        body: BlockBody {
            step_counts: stored.step_counts,
            final_states,
            transactions: stored.transactions,
        },
    })
}

/// Single-writer chain store over a directory of block files.
#[derive(Debug)]
pub struct ChainStore {
    dir: PathBuf,
    blocks: Vec<Block>,
}

fn block_file_name(index: u64) -> String {
    format!("block_{index:06}.json")
}

impl ChainStore {
    /// Creates a store in `dir` (made if missing; must hold no block files).
    pub fn create(dir: &Path) -> Result<Self, ChainError> {
        fs::create_dir_all(dir).map_err(|e| ChainError::StoreError(e.to_string()))?;
        let existing = Self::block_paths(dir)?;
        if !existing.is_empty() {
            return Err(ChainError::StoreError(format!(
                "directory {} already holds {} block file(s)",
                dir.display(),
                existing.len()
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            blocks: Vec::new(),
        })
    }

    /// Opens an existing store, loading every block in index order.
    pub fn open(dir: &Path) -> Result<Self, ChainError> {
        if !dir.is_dir() {
            return Err(ChainError::StoreError(format!(
                "no chain directory at {}",
                dir.display()
            )));
        }
        let mut blocks = Vec::new();
        for (expected, path) in Self::block_paths(dir)?.into_iter().enumerate() {
            let json =
                fs::read_to_string(&path).map_err(|e| ChainError::StoreError(e.to_string()))?;
            let block = block_from_json(&json)
                .map_err(|e| ChainError::StoreError(format!("{}: {e}", path.display())))?;
            if block.header.index != expected as u64 {
                return Err(ChainError::StoreError(format!(
                    "{} holds block index {}, expected {expected}",
                    path.display(),
                    block.header.index
                )));
            }
            blocks.push(block);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            blocks,
        })
    }

    fn block_paths(dir: &Path) -> Result<Vec<PathBuf>, ChainError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| ChainError::StoreError(e.to_string()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("block_") && n.ends_with(".json"))
            })
            .collect();
        paths.sort();
        Ok(paths)
    }

    /// Directory backing this store.
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Blocks in index order.
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    /// True when the chain holds no blocks.
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Digest the next block must build on: tip's own hash, or the all-zero
    /// genesis predecessor for an empty chain.
    pub fn tip_hash(&self, params: &ChainParams) -> Digest {
        self.blocks
            .last()
            .map(|b| b.header.own_hash.clone())
            .unwrap_or_else(|| params.genesis_prev_hash())
    }

    /// Appends a block, enforcing index continuity, and persists it.
    pub fn append_block(&mut self, block: Block) -> Result<(), ChainError> {
        let expected = self.blocks.len() as u64;
        if block.header.index != expected {
            return Err(ChainError::StoreError(format!(
                "appending block index {}, chain tip expects {expected}",
                block.header.index
            )));
        }
        let path = self.dir.join(block_file_name(block.header.index));
        fs::write(&path, block_to_json(&block)?)
            .map_err(|e| ChainError::StoreError(e.to_string()))?;
        self.blocks.push(block);
        Ok(())
    }
}

/// Per-block entry in a chain verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVerification {
    pub index: u64,
    pub report: ValidationReport,
}

/// Whole-chain verification verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub accepted: bool,
    pub blocks: Vec<BlockVerification>,
}

/// Validates every block against its predecessor.
///
/// The expected predecessor digest for block `i+1` is recomputed from block
/// `i`'s announced contents (nothing in the store is trusted), so a
/// historical edit surfaces both at the edited block (linkage) and at its
/// successor (prev-hash mismatch). An empty chain is vacuously valid.
pub fn verify_chain(
    store: &ChainStore,
    params: &ChainParams,
    mode: ValidationMode,
    rng: &mut impl Rng,
) -> Result<ChainReport, ChainError> {
    let mut expected_prev = params.genesis_prev_hash();
    let mut blocks = Vec::with_capacity(store.len());
    let mut accepted = true;
    for block in store.blocks() {
        let report = validate_block(block, &expected_prev, params, mode, rng)?;
        accepted &= report.accepted;
        blocks.push(BlockVerification {
            index: block.header.index,
            report,
        });
        expected_prev = hash(
            &crate::block::block_hash_input(&block.body.transactions, block.header.timestamp_ms),
            &params.hash,
        )?;
    }
    Ok(ChainReport { accepted, blocks })
}
