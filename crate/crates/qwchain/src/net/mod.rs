//! Simulated multi-node network: decoy-protected quantum channels with
//! pluggable adversaries, a walk-hash commitment signature model, elections
//! over those channels, block-production rounds with validator quorums,
//! incentive bookkeeping, and TOML-driven end-to-end scenarios.
//!
//! Everything runs on a deterministic single-threaded scheduler with a
//! simulated millisecond clock; a master seed fixes every sample, so two
//! runs of the same scenario produce byte-identical reports.

mod channel;
mod election;
mod round;
mod scenario;
mod sig;

pub use channel::{transmit_with_decoys, DecoyCheckReport, QuantumChannel};
pub use election::{run_election, ElectionConfig, ElectionOutcome};
pub use round::{
    aggregate_validator_votes, apply_incentives, finalize_and_sync, quorum_needed,
    run_production_round, AttemptOutcome, IncentiveConfig, LedgerState, Mempool,
    ProductionAttempt, RoundConfig, RoundReport, SimClock, SyncReport,
};
pub use scenario::{run_scenario, NetworkSection, ScenarioConfig, SimReport};
pub use sig::{
    sign_transaction, verify_transaction, KeyPair, SignatureScheme, WalkCommitmentScheme,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{ChainError, NodeId};
use crate::qudit::QuditError;
use crate::voting::VoteError;

/// Errors from network-harness operations.
#[derive(Debug, Error)]
pub enum NetError {
    /// Decoy checks failed: the transmission is discarded.
    #[error("channel compromised: decoy error rate {:.3} at threshold {:.3} ({} of {} decoys failed)",
        .0.error_rate, .0.threshold, .0.failed.len(), .0.decoys_total)]
    ChannelCompromised(DecoyCheckReport),
    /// A transaction signature did not verify.
    #[error("invalid signature on transaction from {sender}")]
    InvalidSignature { sender: NodeId },
    /// A transaction with identical signed content was already accepted.
    #[error("replayed transaction from {sender}")]
    ReplayedTransaction { sender: NodeId },
    /// Every representative failed to produce an accepted block.
    #[error("round {} failed: all {} production attempts exhausted", .0.round, .0.attempts.len())]
    RoundFailed(Box<RoundReport>),
    /// A full node reconstructed different block states than the network.
    #[error("sync mismatch at block {block_index}: divergent nodes {divergent:?}")]
    SyncMismatch {
        block_index: u64,
        divergent: Vec<NodeId>,
    },
    /// Scenario or channel configuration violates an invariant.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vote(#[from] VoteError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Hash(#[from] crate::hash::HashError),
    #[error(transparent)]
    Qudit(#[from] QuditError),
}

impl NetError {
    /// True when the error is a protocol abort (channel compromise or a
    /// failed verification group) rather than a local fault.
    pub fn is_protocol_abort(&self) -> bool {
        matches!(
            self,
            Self::ChannelCompromised(_) | Self::Vote(VoteError::ProtocolAbort(_))
        )
    }
}

/// What a node is allowed to do in the current round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Voter,
    Candidate,
    Representative,
    Validator,
    FullNode,
}

/// A participant: stake, keys, roles, and reward balance.
#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub stake_weight: f64,
    pub keypair: KeyPair,
    pub roles: BTreeSet<Role>,
    pub reward_balance: u64,
}

impl Node {
    pub fn new(id: NodeId, stake_weight: f64, keypair: KeyPair) -> Self {
        Self {
            id,
            stake_weight,
            keypair,
            roles: BTreeSet::new(),
            reward_balance: 0,
        }
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }
}

/// Adversary archetypes. Each acts only through the channel or message
/// interfaces it sits on; none can read private state (decoy positions,
/// secret indices, secret keys).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryModel {
    /// Honest network.
    #[default]
    None,
    /// Measures every transmitted qudit in a random basis and forwards the
    /// collapsed state.
    InterceptResend,
    /// As representative, mutates block content after hashing it.
    BlockTamper { node: NodeId },
    /// As voter, attempts to inflate their counted vote.
    VoteForger { voter: usize, attack: ForgeAttack },
    /// Replaces every transmitted state with a freshly sampled random one.
    StateSubstitution,
}

/// How a vote forger cheats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForgeAttack {
    /// Cast more votes than the quantized weight allows.
    OverWeight,
    /// Publish a column with one entry shifted after casting honestly.
    ColumnTamper,
}
