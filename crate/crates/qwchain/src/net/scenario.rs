//! TOML-driven end-to-end simulations: sign and submit transactions, elect
//! representatives, run production rounds, apply incentives, and check
//! full-node synchronization, all under one master seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_incentives, finalize_and_sync, run_election, run_production_round, sign_transaction,
    AdversaryModel, ElectionConfig, IncentiveConfig, LedgerState, Mempool, NetError, Node,
    QuantumChannel, Role, RoundConfig, RoundReport, SignatureScheme, SimClock, SyncReport,
    WalkCommitmentScheme,
};
use crate::block::{ChainParams, NodeId};
use crate::hash::{Digest, HashParams};
use crate::store::ChainStore;
use crate::voting::ElectionTranscript;
use crate::walk::{CoinParams, WalkConfig};
use crate::seeded_rng;

/// Node population and role assignment. One node per stake weight; the
/// listed ids take on candidate, validator, and full-node roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    /// Stake weight per node; node ids run 0..len.
    pub weights: Vec<f64>,
    pub candidates: Vec<NodeId>,
    pub validators: Vec<NodeId>,
    #[serde(default)]
    pub full_nodes: Vec<NodeId>,
}

/// Chain parameters as plain numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSection {
    pub walkers: usize,
    pub position_dim: usize,
    pub step_bound: u32,
    pub hash_cycle: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            walkers: 2,
            position_dim: 16,
            step_bound: 16,
            hash_cycle: 8,
        }
    }
}

/// Production-round schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundsSection {
    pub count: u64,
    #[serde(default = "default_interval")]
    pub block_interval_ms: u64,
    #[serde(default = "default_quorum")]
    pub quorum: f64,
    #[serde(default = "default_txs")]
    pub transactions_per_round: usize,
    #[serde(default = "default_start")]
    pub start_time_ms: u64,
    /// Nodes that never answer their production window.
    #[serde(default)]
    pub idle: Vec<NodeId>,
}

fn default_interval() -> u64 {
    1000
}

fn default_quorum() -> f64 {
    2.0 / 3.0
}

fn default_txs() -> usize {
    3
}

fn default_start() -> u64 {
    1_000
}

/// Channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSection {
    pub decoy_rate: f64,
    pub decoy_dim: usize,
    pub error_threshold: f64,
    pub min_decoys: usize,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            decoy_rate: QuantumChannel::DEFAULT_DECOY_RATE,
            decoy_dim: QuantumChannel::DEFAULT_DECOY_DIM,
            error_threshold: QuantumChannel::DEFAULT_ERROR_THRESHOLD,
            min_decoys: QuantumChannel::DEFAULT_MIN_DECOYS,
        }
    }
}

/// A complete scenario: everything [`run_scenario`] needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub network: NetworkSection,
    pub election: ElectionConfig,
    #[serde(default)]
    pub chain: ChainSection,
    pub rounds: RoundsSection,
    #[serde(default)]
    pub adversary: AdversaryModel,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub incentives: IncentiveConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, NetError> {
        let config: Self =
            toml::from_str(text).map_err(|e| NetError::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let n = self.network.weights.len();
        if n < 2 {
            return Err(NetError::InvalidConfig(
                "need at least 2 weighted nodes".into(),
            ));
        }
        let in_range = |ids: &[NodeId], what: &str| -> Result<(), NetError> {
            for id in ids {
                if id.0 as usize >= n {
                    return Err(NetError::InvalidConfig(format!(
                        "{what} id {id} outside node range 0..{n}"
                    )));
                }
            }
            Ok(())
        };
        in_range(&self.network.candidates, "candidate")?;
        in_range(&self.network.validators, "validator")?;
        in_range(&self.network.full_nodes, "full node")?;
        in_range(&self.rounds.idle, "idle node")?;
        if self.network.candidates.is_empty() {
            return Err(NetError::InvalidConfig("no candidates".into()));
        }
        if self.network.validators.len() < 2 {
            return Err(NetError::InvalidConfig(
                "need at least 2 validators".into(),
            ));
        }
        if self.rounds.count < 1 {
            return Err(NetError::InvalidConfig("need at least 1 round".into()));
        }
        if self.rounds.transactions_per_round < 1 {
            return Err(NetError::InvalidConfig(
                "need at least 1 transaction per round".into(),
            ));
        }
        match &self.adversary {
            AdversaryModel::BlockTamper { node } => in_range(&[*node], "block tamperer")?,
            AdversaryModel::VoteForger { voter, .. } if *voter >= n => {
                return Err(NetError::InvalidConfig(format!(
                    "vote forger index {voter} outside node range 0..{n}"
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Everything a scenario run produces, serializable as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub representatives: Vec<NodeId>,
    pub election: ElectionTranscript,
    /// Reports for every round, failed ones included.
    pub rounds: Vec<RoundReport>,
    /// Round numbers in which every representative was exhausted.
    pub failed_rounds: Vec<u64>,
    pub sync: Vec<SyncReport>,
    pub ledger: LedgerState,
    pub chain_blocks: usize,
}

/// Runs a scenario end to end. The block chain is persisted under
/// `out_dir/chain`; the report is returned for the caller to write.
///
/// Election-phase aborts (compromised channel, failed verification groups)
/// propagate as errors; a failed production round is recorded and the
/// simulation moves on, its transactions rolling over.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<SimReport, NetError> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    let scheme = WalkCommitmentScheme::default();

    let mut nodes: Vec<Node> = config
        .network
        .weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let keypair = scheme.generate_keypair(&mut rng);
            let mut node = Node::new(NodeId(i as u32), w, keypair);
            node.roles.insert(Role::Voter);
            node
        })
        .collect();
    for id in &config.network.candidates {
        nodes[id.0 as usize].roles.insert(Role::Candidate);
    }
    for id in &config.network.validators {
        nodes[id.0 as usize].roles.insert(Role::Validator);
    }
    for id in &config.network.full_nodes {
        nodes[id.0 as usize].roles.insert(Role::FullNode);
    }
    let registry: BTreeMap<NodeId, Vec<u8>> = nodes
        .iter()
        .map(|n| (n.id, n.keypair.public.clone()))
        .collect();

    let mut channel = QuantumChannel::new(
        config.channel.decoy_rate,
        config.channel.decoy_dim,
        config.channel.error_threshold,
        config.channel.min_decoys,
        config.adversary.clone(),
    )?;

    let outcome = run_election(
        &config.network.weights,
        &config.network.candidates,
        &config.election,
        &mut channel,
        &mut rng,
    )?;
    for id in &outcome.representatives {
        nodes[id.0 as usize].roles.insert(Role::Representative);
    }

    let params = ChainParams::new(
        config.chain.walkers,
        config.chain.step_bound,
        WalkConfig::new(config.chain.position_dim, CoinParams::default())?,
        HashParams::for_cycle(config.chain.hash_cycle)?,
    )?;
    let mut store = ChainStore::create(&out_dir.join("chain"))?;
    let round_config = RoundConfig {
        block_interval_ms: config.rounds.block_interval_ms,
        approval_quorum: config.rounds.quorum,
        validators: config.network.validators.clone(),
        representatives: outcome.representatives.clone(),
    };
    let idle: BTreeSet<NodeId> = config.rounds.idle.iter().copied().collect();
    let mut clock = SimClock::new(config.rounds.start_time_ms);
    let mut mempool = Mempool::new();
    let mut ledger = LedgerState::default();
    let mut rounds = Vec::new();
    let mut failed_rounds = Vec::new();
    let mut sync = Vec::new();

    for round in 0..config.rounds.count {
        for i in 0..config.rounds.transactions_per_round {
            let sender = NodeId(rng.gen_range(0..nodes.len()) as u32);
            let receiver = NodeId(rng.gen_range(0..nodes.len()) as u32);
            let mut payload = vec![0u8; rng.gen_range(8..24)];
            rng.fill(payload.as_mut_slice());
            let tx = sign_transaction(
                &scheme,
                &nodes[sender.0 as usize].keypair.secret,
                sender,
                receiver,
                payload,
                clock.now_ms() + i as u64,
            );
            mempool.submit(tx, &scheme, &registry)?;
        }

        let prev = store.tip_hash(&params);
        let report = match run_production_round(
            round,
            &round_config,
            &mut mempool,
            &mut store,
            &params,
            &config.adversary,
            &idle,
            &mut clock,
            &mut rng,
        ) {
            Ok(report) => report,
            Err(NetError::RoundFailed(report)) => {
                failed_rounds.push(round);
                *report
            }
            Err(e) => return Err(e),
        };
        apply_incentives(&report, &mut ledger, &config.incentives);

        if report.block_index.is_some() {
            let block = store.blocks().last().expect("block just appended");
            let views: Vec<(NodeId, Digest)> = config
                .network
                .full_nodes
                .iter()
                .map(|&id| (id, prev.clone()))
                .collect();
            sync.push(finalize_and_sync(block, &views, &params)?);
        }
        rounds.push(report);
    }

    for node in &mut nodes {
        if let Some(balance) = ledger.balances.get(&node.id) {
            node.reward_balance = *balance;
        }
    }

    Ok(SimReport {
        seed: config.seed,
        representatives: outcome.representatives,
        election: outcome.transcript,
        rounds,
        failed_rounds,
        sync,
        ledger,
        chain_blocks: store.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{validate_block, ValidationMode};

    fn honest_config(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            seed,
            network: NetworkSection {
                weights: vec![0.3, 0.3, 0.2, 0.2],
                candidates: vec![NodeId(1), NodeId(2)],
                validators: vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)],
                full_nodes: vec![NodeId(0), NodeId(3)],
            },
            election: ElectionConfig {
                total_votes: 10,
                representatives: 2,
                delta: 2,
                ballot_dim: Some(4),
                votes: Some(vec![vec![2, 1], vec![1, 2], vec![0, 2], vec![1, 1]]),
            },
            chain: ChainSection::default(),
            rounds: RoundsSection {
                count: 2,
                block_interval_ms: 1000,
                quorum: 2.0 / 3.0,
                transactions_per_round: 2,
                start_time_ms: 1_000,
                idle: vec![],
            },
            adversary: AdversaryModel::None,
            channel: ChannelSection::default(),
            incentives: IncentiveConfig::default(),
        }
    }

    #[test]
    fn honest_scenario_runs_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario(&honest_config(1), dir.path()).unwrap();
        assert_eq!(report.chain_blocks, 2);
        assert!(report.failed_rounds.is_empty());
        assert_eq!(report.sync.len(), 2);
        assert!(report.sync.iter().all(|s| s.divergent.is_empty()));
        assert!(report.election.public.inclusion_ok.iter().all(|&ok| ok));
        // the producer earned rewards
        let producer = report.rounds[0].producer.unwrap();
        assert!(report.ledger.balances[&producer] >= 10);
        // chain persisted and reopenable
        let store = ChainStore::open(&dir.path().join("chain")).unwrap();
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn identical_seed_gives_identical_reports() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_scenario(&honest_config(7), dir_a.path()).unwrap();
        let b = run_scenario(&honest_config(7), dir_b.path()).unwrap();
        let json_a = serde_json::to_string_pretty(&a).unwrap();
        let json_b = serde_json::to_string_pretty(&b).unwrap();
        assert_eq!(json_a, json_b);

        let c = run_scenario(&honest_config(8), tempfile::tempdir().unwrap().path()).unwrap();
        assert_ne!(json_a, serde_json::to_string_pretty(&c).unwrap());
    }

    #[test]
    fn block_tamperer_never_gets_a_block_accepted() {
        let mut config = honest_config(3);
        config.adversary = AdversaryModel::BlockTamper { node: NodeId(2) };
        // make sure the tamperer is elected: all weight behind candidate 2
        config.election.votes = Some(vec![vec![0, 3], vec![0, 3], vec![0, 2], vec![0, 2]]);
        config.election.representatives = 2;
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario(&config, dir.path()).unwrap();

        for round in &report.rounds {
            assert_ne!(round.producer, Some(NodeId(2)));
        }
        assert!(report.ledger.flagged.contains_key(&NodeId(2)));
        assert!(report.ledger.excluded.contains(&NodeId(2)));
        // rounds still complete through the honest representative
        assert_eq!(report.chain_blocks, 2);
    }

    #[test]
    fn accepted_blocks_validate_for_honest_checkers_under_all_adversaries() {
        let adversaries = [
            AdversaryModel::None,
            AdversaryModel::BlockTamper { node: NodeId(1) },
            AdversaryModel::VoteForger {
                voter: 0,
                attack: crate::net::ForgeAttack::OverWeight,
            },
            AdversaryModel::VoteForger {
                voter: 1,
                attack: crate::net::ForgeAttack::ColumnTamper,
            },
        ];
        for (i, adversary) in adversaries.into_iter().enumerate() {
            let mut config = honest_config(10 + i as u64);
            config.adversary = adversary;
            let dir = tempfile::tempdir().unwrap();
            match run_scenario(&config, dir.path()) {
                Ok(_) => {}
                Err(e) if e.is_protocol_abort() => continue,
                Err(e) => panic!("scenario {i}: {e}"),
            }
            let params = ChainParams::new(
                config.chain.walkers,
                config.chain.step_bound,
                WalkConfig::new(config.chain.position_dim, CoinParams::default()).unwrap(),
                HashParams::for_cycle(config.chain.hash_cycle).unwrap(),
            )
            .unwrap();
            let store = ChainStore::open(&dir.path().join("chain")).unwrap();
            let mut expected_prev = params.genesis_prev_hash();
            let mut rng = seeded_rng(999);
            for block in store.blocks() {
                let check = validate_block(
                    block,
                    &expected_prev,
                    &params,
                    ValidationMode::Exact,
                    &mut rng,
                )
                .unwrap();
                assert!(check.accepted, "scenario {i}: stored block fails honest check");
                expected_prev = block.header.own_hash.clone();
            }
        }
    }

    #[test]
    fn intercept_resend_aborts_the_whole_scenario() {
        let mut config = honest_config(4);
        config.adversary = AdversaryModel::InterceptResend;
        let dir = tempfile::tempdir().unwrap();
        let err = run_scenario(&config, dir.path()).unwrap_err();
        assert!(err.is_protocol_abort(), "got {err}");
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let text = r#"
seed = 42

[network]
weights = [0.3, 0.3, 0.2, 0.2]
candidates = [1, 2]
validators = [0, 1, 2, 3]
full_nodes = [0, 3]

[election]
total_votes = 10
representatives = 1
delta = 2
ballot_dim = 4
votes = [[2, 1], [1, 2], [0, 2], [1, 1]]

[chain]
walkers = 2
position_dim = 16
step_bound = 16
hash_cycle = 8

[rounds]
count = 1
block_interval_ms = 500
quorum = 0.6667
transactions_per_round = 2

[adversary]
kind = "none"
"#;
        let config = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.network.candidates, vec![NodeId(1), NodeId(2)]);
        assert_eq!(config.channel, ChannelSection::default());

        let bad = text.replace("candidates = [1, 2]", "candidates = [9]");
        assert!(matches!(
            ScenarioConfig::from_toml(&bad),
            Err(NetError::InvalidConfig(_))
        ));
    }

    #[test]
    fn idle_representative_rolls_to_next_and_gets_excluded() {
        let mut config = honest_config(5);
        config.election.representatives = 2;
        config.rounds.count = 2;
        // first-in-order representative idles every round
        let dir = tempfile::tempdir().unwrap();
        let probe = run_scenario(&config, dir.path()).unwrap();
        let first = probe.representatives[0];

        // three rounds under rotation give the idle node two timeouts
        let mut config = honest_config(5);
        config.election.representatives = 2;
        config.rounds.count = 3;
        config.rounds.idle = vec![first];
        config.incentives.timeout_exclusion_after = 2;
        let dir = tempfile::tempdir().unwrap();
        let report = run_scenario(&config, dir.path()).unwrap();
        assert_eq!(report.chain_blocks, 3);
        for round in &report.rounds {
            assert_ne!(round.producer, Some(first));
        }
        assert!(report.ledger.excluded.contains(&first));
    }
}
