//! End-to-end representative elections over decoy-protected channels.

use serde::{Deserialize, Serialize};

use super::{AdversaryModel, ForgeAttack, NetError, QuantumChannel};
use crate::block::NodeId;
use crate::voting::{
    ballot_dim_for, build_ballot_box, cast_vote, distribute_indices, select_representatives,
    tally, verify_inclusion_total, voter_profiles, AuditTranscript, ElectionTranscript,
    PublicTranscript, VoteError, DEFAULT_DELTA,
};
use crate::SimRng;

/// Election parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionConfig {
    /// Total quantized votes `T_v`.
    pub total_votes: u32,
    /// Representatives to elect.
    #[serde(default = "default_representatives")]
    pub representatives: usize,
    /// Verification groups per transmission.
    #[serde(default = "default_delta")]
    pub delta: usize,
    /// Ballot dimension `d`; default is the smallest power of two > `T_v`.
    #[serde(default)]
    pub ballot_dim: Option<u32>,
    /// `votes[l][k]`: voter `l`'s intended vote for candidate `k`. When
    /// omitted, voter `l` casts their full weight for candidate `l mod m`.
    #[serde(default)]
    pub votes: Option<Vec<Vec<u32>>>,
}

fn default_representatives() -> usize {
    1
}

fn default_delta() -> usize {
    DEFAULT_DELTA
}

/// Result of a completed election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionOutcome {
    /// Elected representatives in production order.
    pub representatives: Vec<NodeId>,
    pub transcript: ElectionTranscript,
}

/// Runs a full election: per candidate, privacy indices and a ballot box
/// are distributed through the channel, voters cast and publish columns,
/// tallies are verified for inclusion, and the top `r` candidates are
/// selected.
///
/// A `VoteForger` adversary on the channel twists the named voter's
/// behavior: an over-weight cast is rejected by the weight guard (tallies
/// unaffected); a tampered column is published as-is and caught by the
/// inclusion checks.
pub fn run_election(
    weights: &[f64],
    candidates: &[NodeId],
    config: &ElectionConfig,
    channel: &mut QuantumChannel,
    rng: &mut SimRng,
) -> Result<ElectionOutcome, NetError> {
    let n = weights.len();
    let m = candidates.len();
    if m < 1 {
        return Err(NetError::InvalidConfig("no candidates".into()));
    }
    if config.representatives < 1 || config.representatives > m {
        return Err(NetError::InvalidConfig(format!(
            "cannot elect {} representatives from {m} candidates",
            config.representatives
        )));
    }
    let profiles = voter_profiles(weights, config.total_votes)?;
    let max_weight = profiles
        .iter()
        .map(|p| p.quantized_weight)
        .max()
        .unwrap_or(0);
    let d = match config.ballot_dim {
        Some(d) => {
            // entries live mod d; a row readback is exact only while the
            // largest single vote stays below d
            if d <= max_weight {
                return Err(NetError::InvalidConfig(format!(
                    "ballot dimension {d} must exceed the largest quantized weight {max_weight}"
                )));
            }
            d
        }
        None => ballot_dim_for(config.total_votes) as u32,
    };

    let votes: Vec<Vec<u32>> = match &config.votes {
        Some(v) => {
            if v.len() != n || v.iter().any(|row| row.len() != m) {
                return Err(NetError::InvalidConfig(format!(
                    "votes table must be {n}×{m}"
                )));
            }
            v.clone()
        }
        None => (0..n)
            .map(|l| {
                let mut row = vec![0u32; m];
                row[l % m] = profiles[l].quantized_weight;
                row
            })
            .collect(),
    };

    let forger = match &channel.adversary {
        AdversaryModel::VoteForger { voter, attack } => {
            if *voter >= n {
                return Err(NetError::InvalidConfig(format!(
                    "vote forger index {voter} outside electorate of {n}"
                )));
            }
            Some((*voter, *attack))
        }
        _ => None,
    };

    let mut flags = Vec::new();
    let mut index_sets = Vec::with_capacity(m);
    let mut matrices = Vec::with_capacity(m);
    for &candidate in candidates {
        index_sets.push(distribute_indices(candidate, n, config.delta, channel, rng)?);
        matrices.push(build_ballot_box(
            candidate,
            n,
            d,
            config.delta,
            channel,
            rng,
        )?);
    }

    // Casting: per voter, per candidate, guarded by the per-cast weight
    // check and a running budget so Σ_k votes ≤ w̃ even for forged inputs.
    let mut cast_totals = vec![0u32; n];
    let mut applied_votes = vec![vec![0u32; m]; n];
    let mut published: Vec<Vec<Option<Vec<u32>>>> = vec![vec![None; n]; m];
    for (l, profile) in profiles.iter().enumerate() {
        let budget = profile.quantized_weight;
        let mut spent = 0u32;
        for (k, matrix) in matrices.iter().enumerate() {
            let mut intended = votes[l][k];
            if let Some((voter, ForgeAttack::OverWeight)) = forger {
                if voter == l && k == 0 {
                    intended = budget + 1;
                }
            }
            let index = index_sets[k].indices[l];
            let column = matrix.column(l);
            let outcome = if spent + intended > budget {
                Err(VoteError::OverWeight {
                    vote: intended,
                    allowed: budget - spent,
                })
            } else {
                cast_vote(&column, index, intended, d, budget)
            };
            let updated = match outcome {
                Ok(updated) => {
                    spent += intended;
                    applied_votes[l][k] = intended;
                    updated
                }
                Err(VoteError::OverWeight { vote, allowed }) => {
                    flags.push(format!(
                        "voter {l} cast {vote} for candidate {} with {allowed} votes left: rejected",
                        matrix.candidate
                    ));
                    column
                }
                Err(e) => return Err(e.into()),
            };
            published[k][l] = Some(updated);
        }
        cast_totals[l] = spent;
    }

    if let Some((voter, ForgeAttack::ColumnTamper)) = forger {
        for (k, columns) in published.iter_mut().enumerate() {
            let column = columns[voter].as_mut().expect("column published above");
            let row = (index_sets[k].indices[voter] + 1) % n;
            column[row] = (column[row] + 1) % d;
        }
    }

    let mut tallies = Vec::with_capacity(m);
    for (k, matrix) in matrices.iter().enumerate() {
        tallies.push(tally(matrix.candidate, &published[k], d)?);
    }

    let inclusion_ok: Vec<bool> = (0..n)
        .map(|l| verify_inclusion_total(cast_totals[l], l, &index_sets, &tallies))
        .collect();
    for (l, ok) in inclusion_ok.iter().enumerate() {
        if !ok {
            flags.push(format!(
                "voter {l} inclusion check failed: published tallies disagree with cast votes"
            ));
        }
    }

    let representatives = select_representatives(&tallies, config.representatives, rng)?;

    let transcript = ElectionTranscript {
        public: PublicTranscript {
            total_votes: config.total_votes,
            ballot_dim: d,
            delta: config.delta,
            quantized_weights: profiles.iter().map(|p| p.quantized_weight).collect(),
            tallies,
            representatives: representatives.clone(),
            inclusion_ok,
            flags,
        },
        audit: AuditTranscript {
            index_sets,
            initial_matrices: matrices,
            votes: applied_votes,
            cast_totals,
        },
    };
    Ok(ElectionOutcome {
        representatives,
        transcript,
    })
}
