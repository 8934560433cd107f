//! Block-production rounds: mempool intake, representative rotation,
//! validator quorums, incentives, and full-node synchronization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AdversaryModel, NetError, SignatureScheme};
use crate::block::{
    build_block, validate_block, ChainParams, NodeId, Transaction, ValidationMode,
};
use crate::hash::Digest;
use crate::store::ChainStore;
use crate::voting::{
    ballot_dim_for, build_ballot_box, cast_vote, distribute_indices, tally, IdealTransport,
};
use crate::{tol, SimRng};

/// Discrete simulated time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    now_ms: u64,
}

impl SimClock {
    pub fn new(start_ms: u64) -> Self {
        Self { now_ms: start_ms }
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    /// Advances by one window and returns the new time.
    pub fn advance(&mut self, ms: u64) -> u64 {
        self.now_ms += ms;
        self.now_ms
    }
}

/// Pending transactions with signature verification and replay protection.
#[derive(Debug, Default)]
pub struct Mempool {
    pending: Vec<Transaction>,
    seen: BTreeSet<Vec<u8>>,
}

impl Mempool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Verifies the signature under the sender's registered key and rejects
    /// replays of already-seen signed content.
    pub fn submit(
        &mut self,
        tx: Transaction,
        scheme: &dyn SignatureScheme,
        public_keys: &BTreeMap<NodeId, Vec<u8>>,
    ) -> Result<(), NetError> {
        let sender = tx.sender;
        let Some(public) = public_keys.get(&sender) else {
            return Err(NetError::InvalidSignature { sender });
        };
        if !scheme.verify(public, &tx.signing_bytes(), &tx.signature) {
            return Err(NetError::InvalidSignature { sender });
        }
        if !self.seen.insert(tx.signing_bytes()) {
            return Err(NetError::ReplayedTransaction { sender });
        }
        self.pending.push(tx);
        Ok(())
    }

    pub fn pending(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    fn take_all(&mut self) -> Vec<Transaction> {
        std::mem::take(&mut self.pending)
    }
}

/// Parameters of a production round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    /// Window `f_t` granted to each representative, simulated milliseconds.
    pub block_interval_ms: u64,
    /// Approval quorum as a fraction of the validator set, in (1/2, 1].
    pub approval_quorum: f64,
    pub validators: Vec<NodeId>,
    /// Representatives in production order.
    pub representatives: Vec<NodeId>,
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.approval_quorum > 0.5 && self.approval_quorum <= 1.0) {
            return Err(NetError::InvalidConfig(format!(
                "quorum {} outside (1/2, 1]",
                self.approval_quorum
            )));
        }
        if self.validators.len() < 2 {
            return Err(NetError::InvalidConfig(
                "need at least 2 validators".into(),
            ));
        }
        if self.representatives.is_empty() {
            return Err(NetError::InvalidConfig("no representatives".into()));
        }
        Ok(())
    }
}

/// Votes needed for acceptance: `⌈quorum · V⌉`.
pub fn quorum_needed(quorum: f64, validators: usize) -> usize {
    (quorum * validators as f64).ceil() as usize
}

/// Aggregates validator approvals with the Cat-state ballot machinery:
/// every validator holds weight 1 and casts 1 (approve) or 0.
pub fn aggregate_validator_votes(votes: &[bool], rng: &mut SimRng) -> Result<usize, NetError> {
    let v = votes.len();
    if v < 2 {
        return Err(NetError::InvalidConfig(
            "vote aggregation needs at least 2 validators".into(),
        ));
    }
    // synthetic ballot: one candidate ("accept"), T_v = V, weight 1 each
    let candidate = NodeId(u32::MAX);
    let d = ballot_dim_for(v as u32) as u32;
    let delta = 1;
    let indices = distribute_indices(candidate, v, delta, &mut IdealTransport, rng)?;
    let matrix = build_ballot_box(candidate, v, d, delta, &mut IdealTransport, rng)?;
    let mut published = vec![None; v];
    for (l, &approve) in votes.iter().enumerate() {
        let column = matrix.column(l);
        let updated = cast_vote(&column, indices.indices[l], approve as u32, d, 1)?;
        published[l] = Some(updated);
    }
    let sheet = tally(candidate, &published, d)?;
    Ok(sheet.total as usize)
}

/// One representative's attempt within a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionAttempt {
    pub representative: NodeId,
    pub outcome: AttemptOutcome,
    /// Per-validator approval votes (empty on timeout).
    pub validator_votes: Vec<(NodeId, bool)>,
    /// Failing checks cited by rejecting validators.
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttemptOutcome {
    Accepted { approvals: usize, needed: usize },
    Rejected { approvals: usize, needed: usize },
    TimedOut,
}

/// Full record of one production round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u64,
    pub started_at_ms: u64,
    pub attempts: Vec<ProductionAttempt>,
    pub producer: Option<NodeId>,
    pub block_index: Option<u64>,
}

/// Runs one round: representatives take turns building a block from the
/// mempool; validators check it independently; the block is appended iff
/// approvals reach `⌈quorum · V⌉`. On rejection or timeout the transactions
/// roll to the next representative.
///
/// Returns `RoundFailed` when every representative is exhausted; the error
/// carries the full report.
#[allow(clippy::too_many_arguments)]
pub fn run_production_round(
    round: u64,
    config: &RoundConfig,
    mempool: &mut Mempool,
    store: &mut ChainStore,
    params: &ChainParams,
    adversary: &AdversaryModel,
    idle: &BTreeSet<NodeId>,
    clock: &mut SimClock,
    rng: &mut SimRng,
) -> Result<RoundReport, NetError> {
    config.validate()?;
    if mempool.is_empty() {
        return Err(NetError::InvalidConfig(
            "round started with an empty mempool".into(),
        ));
    }
    let needed = quorum_needed(config.approval_quorum, config.validators.len());
    let started_at_ms = clock.now_ms();
    let mut attempts = Vec::new();

    // production rotates: round r starts at representative r mod R
    let reps = &config.representatives;
    let order = (0..reps.len()).map(|i| reps[(round as usize + i) % reps.len()]);
    for rep in order {
        let timestamp_ms = clock.advance(config.block_interval_ms);
        if idle.contains(&rep) {
            attempts.push(ProductionAttempt {
                representative: rep,
                outcome: AttemptOutcome::TimedOut,
                validator_votes: Vec::new(),
                evidence: vec![format!("{rep} produced nothing within its window")],
            });
            continue;
        }

        let prev_hash = store.tip_hash(params);
        let index = store.len() as u64;
        let mut block = build_block(
            &prev_hash,
            index,
            mempool.pending().to_vec(),
            timestamp_ms,
            params,
        )?;
        if let AdversaryModel::BlockTamper { node } = adversary {
            if *node == rep {
                // announced content mutated after hashing
                block.body.transactions[0].payload.push(0xA5);
            }
        }

        let mut votes = Vec::with_capacity(config.validators.len());
        let mut evidence = Vec::new();
        for &validator in &config.validators {
            let report =
                validate_block(&block, &prev_hash, params, ValidationMode::Exact, rng)?;
            if !report.accepted && evidence.is_empty() {
                for line in &report.evidence {
                    evidence.push(format!("{validator}: {line}"));
                }
            }
            votes.push((validator, report.accepted));
        }
        let ballots: Vec<bool> = votes.iter().map(|&(_, v)| v).collect();
        let approvals = aggregate_validator_votes(&ballots, rng)?;

        if approvals >= needed {
            store.append_block(block)?;
            mempool.take_all();
            attempts.push(ProductionAttempt {
                representative: rep,
                outcome: AttemptOutcome::Accepted { approvals, needed },
                validator_votes: votes,
                evidence,
            });
            return Ok(RoundReport {
                round,
                started_at_ms,
                attempts,
                producer: Some(rep),
                block_index: Some(index),
            });
        }
        attempts.push(ProductionAttempt {
            representative: rep,
            outcome: AttemptOutcome::Rejected { approvals, needed },
            validator_votes: votes,
            evidence,
        });
    }

    Err(NetError::RoundFailed(Box::new(RoundReport {
        round,
        started_at_ms,
        attempts,
        producer: None,
        block_index: None,
    })))
}

/// Reward and exclusion constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncentiveConfig {
    /// Reward credited to a successful producer.
    pub producer_reward: u64,
    /// Reward credited to each approving validator of an accepted block.
    pub validator_reward: u64,
    /// Consecutive timeouts before a representative is excluded.
    pub timeout_exclusion_after: u32,
}

impl Default for IncentiveConfig {
    fn default() -> Self {
        Self {
            producer_reward: 10,
            validator_reward: 2,
            timeout_exclusion_after: 2,
        }
    }
}

/// Reward balances plus misbehavior bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    pub balances: BTreeMap<NodeId, u64>,
    pub consecutive_timeouts: BTreeMap<NodeId, u32>,
    /// Nodes caught misbehaving, with the citing evidence.
    pub flagged: BTreeMap<NodeId, Vec<String>>,
    /// Nodes excluded from the next election's candidate set.
    pub excluded: BTreeSet<NodeId>,
}

/// Applies round outcomes to the ledger: rewards for accepted production
/// and approvals, flags plus immediate exclusion for cited tampering, and
/// exclusion after `timeout_exclusion_after` consecutive timeouts.
pub fn apply_incentives(report: &RoundReport, ledger: &mut LedgerState, config: &IncentiveConfig) {
    for attempt in &report.attempts {
        let rep = attempt.representative;
        match &attempt.outcome {
            AttemptOutcome::TimedOut => {
                let count = ledger.consecutive_timeouts.entry(rep).or_insert(0);
                *count += 1;
                if *count >= config.timeout_exclusion_after {
                    ledger.excluded.insert(rep);
                }
            }
            AttemptOutcome::Rejected { .. } => {
                ledger.consecutive_timeouts.remove(&rep);
                if !attempt.evidence.is_empty() {
                    ledger
                        .flagged
                        .entry(rep)
                        .or_default()
                        .extend(attempt.evidence.iter().cloned());
                    ledger.excluded.insert(rep);
                }
            }
            AttemptOutcome::Accepted { .. } => {
                ledger.consecutive_timeouts.remove(&rep);
                *ledger.balances.entry(rep).or_insert(0) += config.producer_reward;
                for &(validator, approved) in &attempt.validator_votes {
                    if approved {
                        *ledger.balances.entry(validator).or_insert(0) +=
                            config.validator_reward;
                    }
                }
            }
        }
    }
}

/// One full node's view of the consistency check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub block_index: u64,
    pub checked: usize,
    pub divergent: Vec<NodeId>,
}

/// Every full node rebuilds the accepted block's walk states from classical
/// metadata (its own prev-hash view, the transactions, the timestamp) and
/// compares amplitudes with the canonical block.
pub fn finalize_and_sync(
    block: &crate::block::Block,
    local_views: &[(NodeId, Digest)],
    params: &ChainParams,
) -> Result<SyncReport, NetError> {
    let mut divergent = Vec::new();
    for (node, believed_prev) in local_views {
        let rebuilt = build_block(
            believed_prev,
            block.header.index,
            block.body.transactions.clone(),
            block.header.timestamp_ms,
            params,
        )?;
        let mut matches = rebuilt.body.step_counts == block.body.step_counts
            && rebuilt.header.own_hash == block.header.own_hash;
        if matches {
            for (a, b) in rebuilt
                .body
                .final_states
                .iter()
                .zip(&block.body.final_states)
            {
                if a.max_amp_diff(b)? > tol::SYNC_AMPLITUDE {
                    matches = false;
                    break;
                }
            }
        }
        if !matches {
            divergent.push(*node);
        }
    }
    if divergent.is_empty() {
        Ok(SyncReport {
            block_index: block.header.index,
            checked: local_views.len(),
            divergent,
        })
    } else {
        Err(NetError::SyncMismatch {
            block_index: block.header.index,
            divergent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{sign_transaction, WalkCommitmentScheme};
    use crate::seeded_rng;
    use crate::store::ChainStore;
    use crate::walk::{CoinParams, WalkConfig};
    use crate::hash::HashParams;

    fn nid(k: u32) -> NodeId {
        NodeId(k)
    }

    fn test_params() -> ChainParams {
        ChainParams::new(
            2,
            16,
            WalkConfig::new(16, CoinParams::default()).unwrap(),
            HashParams::for_cycle(8).unwrap(),
        )
        .unwrap()
    }

    fn round_config() -> RoundConfig {
        RoundConfig {
            block_interval_ms: 1000,
            approval_quorum: 2.0 / 3.0,
            validators: vec![nid(0), nid(1), nid(2), nid(3)],
            representatives: vec![nid(4), nid(5)],
        }
    }

    fn filled_mempool(
        scheme: &WalkCommitmentScheme,
        rng: &mut SimRng,
        count: usize,
    ) -> (Mempool, BTreeMap<NodeId, Vec<u8>>) {
        let keys = scheme.generate_keypair(rng);
        let mut registry = BTreeMap::new();
        registry.insert(nid(7), keys.public.clone());
        let mut mempool = Mempool::new();
        for i in 0..count {
            let tx = sign_transaction(
                scheme,
                &keys.secret,
                nid(7),
                nid(8),
                format!("transfer {i}").into_bytes(),
                1_000 + i as u64,
            );
            mempool.submit(tx, scheme, &registry).unwrap();
        }
        (mempool, registry)
    }

    #[test]
    fn mempool_rejects_bad_signature_and_replay() {
        let scheme = WalkCommitmentScheme::default();
        let mut rng = seeded_rng(60);
        let keys = scheme.generate_keypair(&mut rng);
        let mut registry = BTreeMap::new();
        registry.insert(nid(7), keys.public.clone());
        let mut mempool = Mempool::new();

        let tx = sign_transaction(&scheme, &keys.secret, nid(7), nid(8), vec![1, 2], 5);
        mempool.submit(tx.clone(), &scheme, &registry).unwrap();
        assert!(matches!(
            mempool.submit(tx.clone(), &scheme, &registry),
            Err(NetError::ReplayedTransaction { .. })
        ));

        let mut forged = tx;
        forged.payload = vec![9, 9];
        forged.timestamp_ms = 6;
        assert!(matches!(
            mempool.submit(forged, &scheme, &registry),
            Err(NetError::InvalidSignature { .. })
        ));
        assert_eq!(mempool.len(), 1);
    }

    #[test]
    fn quorum_arithmetic() {
        assert_eq!(quorum_needed(2.0 / 3.0, 4), 3);
        assert_eq!(quorum_needed(2.0 / 3.0, 3), 2);
        assert_eq!(quorum_needed(0.75, 4), 3);
        assert_eq!(quorum_needed(1.0, 5), 5);
    }

    #[test]
    fn vote_aggregation_counts_approvals() {
        let mut rng = seeded_rng(61);
        assert_eq!(
            aggregate_validator_votes(&[true, true, true, false], &mut rng).unwrap(),
            3
        );
        assert_eq!(
            aggregate_validator_votes(&[false, true, false, true], &mut rng).unwrap(),
            2
        );
        assert_eq!(
            aggregate_validator_votes(&[false, false], &mut rng).unwrap(),
            0
        );
    }

    #[test]
    fn honest_round_produces_first_try() {
        let scheme = WalkCommitmentScheme::default();
        let mut rng = seeded_rng(62);
        let params = test_params();
        let dir = tempfile::tempdir().unwrap();
        let mut store = ChainStore::create(dir.path()).unwrap();
        let (mut mempool, _) = filled_mempool(&scheme, &mut rng, 3);
        let mut clock = SimClock::new(0);

        let report = run_production_round(
            0,
            &round_config(),
            &mut mempool,
            &mut store,
            &params,
            &AdversaryModel::None,
            &BTreeSet::new(),
            &mut clock,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.producer, Some(nid(4)));
        assert_eq!(report.block_index, Some(0));
        assert_eq!(report.attempts.len(), 1);
        assert!(matches!(
            report.attempts[0].outcome,
            AttemptOutcome::Accepted {
                approvals: 4,
                needed: 3
            }
        ));
        assert!(mempool.is_empty());
        assert_eq!(store.len(), 1);
        assert_eq!(clock.now_ms(), 1000);
    }

    #[test]
    fn tampering_representative_is_rejected_and_next_produces() {
        let scheme = WalkCommitmentScheme::default();
        let mut rng = seeded_rng(63);
        let params = test_params();
        let dir = tempfile::tempdir().unwrap();
        let mut store = ChainStore::create(dir.path()).unwrap();
        let (mut mempool, _) = filled_mempool(&scheme, &mut rng, 2);
        let mut clock = SimClock::new(0);

        let report = run_production_round(
            0,
            &round_config(),
            &mut mempool,
            &mut store,
            &params,
            &AdversaryModel::BlockTamper { node: nid(4) },
            &BTreeSet::new(),
            &mut clock,
            &mut rng,
        )
        .unwrap();
        assert_eq!(report.producer, Some(nid(5)));
        assert_eq!(report.attempts.len(), 2);
        assert!(matches!(
            report.attempts[0].outcome,
            AttemptOutcome::Rejected {
                approvals: 0,
                needed: 3
            }
        ));
        assert!(!report.attempts[0].evidence.is_empty());
        assert_eq!(store.len(), 1);

        // the appended block still validates for a fresh honest validator
        let block = &store.blocks()[0];
        let check = validate_block(
            block,
            &params.genesis_prev_hash(),
            &params,
            ValidationMode::Exact,
            &mut rng,
        )
        .unwrap();
        assert!(check.accepted);
    }

    #[test]
    fn idle_representatives_time_out_and_round_can_fail() {
        let scheme = WalkCommitmentScheme::default();
        let mut rng = seeded_rng(64);
        let params = test_params();
        let dir = tempfile::tempdir().unwrap();
        let mut store = ChainStore::create(dir.path()).unwrap();
        let (mut mempool, _) = filled_mempool(&scheme, &mut rng, 2);
        let mut clock = SimClock::new(0);
        let idle: BTreeSet<NodeId> = [nid(4), nid(5)].into_iter().collect();

        let err = run_production_round(
            0,
            &round_config(),
            &mut mempool,
            &mut store,
            &params,
            &AdversaryModel::None,
            &idle,
            &mut clock,
            &mut rng,
        )
        .unwrap_err();
        let NetError::RoundFailed(report) = err else {
            panic!("expected round failure");
        };
        assert_eq!(report.attempts.len(), 2);
        assert!(report
            .attempts
            .iter()
            .all(|a| a.outcome == AttemptOutcome::TimedOut));
        // transactions roll over, nothing appended
        assert_eq!(mempool.len(), 2);
        assert!(store.is_empty());
    }

    #[test]
    fn incentives_reward_flag_and_exclude() {
        let config = IncentiveConfig::default();
        let mut ledger = LedgerState::default();

        let accepted = RoundReport {
            round: 0,
            started_at_ms: 0,
            attempts: vec![ProductionAttempt {
                representative: nid(4),
                outcome: AttemptOutcome::Accepted {
                    approvals: 3,
                    needed: 3,
                },
                validator_votes: vec![(nid(0), true), (nid(1), true), (nid(2), true), (nid(3), false)],
                evidence: vec![],
            }],
            producer: Some(nid(4)),
            block_index: Some(0),
        };
        apply_incentives(&accepted, &mut ledger, &config);
        assert_eq!(ledger.balances[&nid(4)], 10);
        assert_eq!(ledger.balances[&nid(0)], 2);
        assert!(!ledger.balances.contains_key(&nid(3)));

        let tampered = RoundReport {
            round: 1,
            started_at_ms: 0,
            attempts: vec![ProductionAttempt {
                representative: nid(5),
                outcome: AttemptOutcome::Rejected {
                    approvals: 0,
                    needed: 3,
                },
                validator_votes: vec![],
                evidence: vec!["node0: linkage: announced hash differs".into()],
            }],
            producer: None,
            block_index: None,
        };
        apply_incentives(&tampered, &mut ledger, &config);
        assert!(ledger.flagged.contains_key(&nid(5)));
        assert!(ledger.excluded.contains(&nid(5)));

        // two consecutive timeouts exclude; an intervening success resets
        let timeout = |round| RoundReport {
            round,
            started_at_ms: 0,
            attempts: vec![ProductionAttempt {
                representative: nid(6),
                outcome: AttemptOutcome::TimedOut,
                validator_votes: vec![],
                evidence: vec![],
            }],
            producer: None,
            block_index: None,
        };
        apply_incentives(&timeout(2), &mut ledger, &config);
        assert!(!ledger.excluded.contains(&nid(6)));
        apply_incentives(&timeout(3), &mut ledger, &config);
        assert!(ledger.excluded.contains(&nid(6)));
    }

    #[test]
    fn sync_check_names_the_divergent_node() {
        let scheme = WalkCommitmentScheme::default();
        let mut rng = seeded_rng(65);
        let params = test_params();
        let dir = tempfile::tempdir().unwrap();
        let mut store = ChainStore::create(dir.path()).unwrap();
        let (mut mempool, _) = filled_mempool(&scheme, &mut rng, 2);
        let mut clock = SimClock::new(0);
        run_production_round(
            0,
            &round_config(),
            &mut mempool,
            &mut store,
            &params,
            &AdversaryModel::None,
            &BTreeSet::new(),
            &mut clock,
            &mut rng,
        )
        .unwrap();
        let block = &store.blocks()[0];
        let genesis = params.genesis_prev_hash();

        let honest: Vec<(NodeId, Digest)> =
            (0..3).map(|i| (nid(i), genesis.clone())).collect();
        let report = finalize_and_sync(block, &honest, &params).unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.divergent.is_empty());

        let mut corrupted = honest.clone();
        corrupted[1].1 = Digest::from_bytes(vec![0x42; genesis.len()]);
        match finalize_and_sync(block, &corrupted, &params) {
            Err(NetError::SyncMismatch { divergent, .. }) => {
                assert_eq!(divergent, vec![nid(1)]);
            }
            other => panic!("expected sync mismatch, got {other:?}"),
        }

        // zero full nodes: vacuous success
        let report = finalize_and_sync(block, &[], &params).unwrap();
        assert_eq!(report.checked, 0);
    }
}
