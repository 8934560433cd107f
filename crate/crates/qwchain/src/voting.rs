//! Weighted delegated-stake voting over entangled Cat states.
//!
//! An election runs in two entangled-state phases per candidate, both built
//! from the `n`-particle Cat state
//! `|Φ(ϑ₁,…,ϑ_n)⟩ = (1/√dim) Σ_l ω^{l·ϑ₁} |l, l+ϑ₂, …, l+ϑ_n⟩` (mod dim):
//!
//! 1. **Privacy indices** — `1+δ` groups with distinct nonzero offset
//!    permutations; voters verify `δ` randomly chosen groups (computational
//!    outcomes must match the disclosed offsets on one copy, Fourier
//!    outcomes must sum to 0 mod `n` on the other) and measure the last to
//!    obtain a secret permutation of row indices.
//! 2. **Ballot box** — `n+δ` all-zero-offset groups of dimension `d`;
//!    after verification the remaining `n` groups are Fourier-measured to
//!    fill an `n×n` matrix whose every row sums to 0 mod `d`. Each voter
//!    adds their vote to their secret row of their own column; row sums of
//!    the published columns then reveal exactly one voter's vote per row
//!    while single columns reveal nothing.
//!
//! Entangled measurements across distributed voters are simulated by
//! sampling one joint outcome centrally and revealing each voter only their
//! component.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::NodeId;
use crate::qudit::{MeasurementBasis, QuditError, StateVector, SubsystemLayout};
use crate::SimRng;

/// Default number of verification groups δ.
pub const DEFAULT_DELTA: usize = 3;

/// Why a protocol run was aborted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    /// Decoy checks on a transmission exceeded the channel's error threshold.
    ChannelCompromised {
        error_rate: f64,
        threshold: f64,
        failed_decoys: Vec<usize>,
    },
    /// A verification group failed its measurement checks.
    GroupVerificationFailed { group: usize, detail: String },
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ChannelCompromised {
                error_rate,
                threshold,
                failed_decoys,
            } => write!(
                f,
                "channel compromised: decoy error rate {error_rate:.3} ≥ threshold {threshold:.3} (failed decoys {failed_decoys:?})"
            ),
            Self::GroupVerificationFailed { group, detail } => {
                write!(f, "verification group {group} failed: {detail}")
            }
        }
    }
}

/// Errors from voting operations.
#[derive(Debug, Error, PartialEq)]
pub enum VoteError {
    /// A Cat-state spec or matrix shape violates its invariants.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// A raw stake weight is not positive (or T_v is zero).
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    /// A vote exceeds the voter's quantized weight.
    #[error("vote {vote} exceeds quantized weight {allowed}")]
    OverWeight { vote: u32, allowed: u32 },
    /// A voter has not published their column.
    #[error("ballot incomplete: voter {voter} has not published a column")]
    IncompleteBallot { voter: usize },
    /// More representatives requested than candidates available.
    #[error("requested {requested} representatives from {available} candidates")]
    InvalidCount { requested: usize, available: usize },
    /// The protocol aborted during verification.
    #[error("protocol abort: {0}")]
    ProtocolAbort(AbortReason),
    /// Statevector failure (propagated).
    #[error(transparent)]
    Qudit(#[from] QuditError),
}

/// Carrier for prepared states between candidate and voters.
///
/// The network harness implements this with a decoy-protected channel (and
/// optional adversary); [`IdealTransport`] delivers states untouched.
pub trait Transport {
    fn transmit(
        &mut self,
        states: Vec<StateVector>,
        rng: &mut SimRng,
    ) -> Result<Vec<StateVector>, AbortReason>;
}

/// Transport with no decoys, no noise, and no adversary.
pub struct IdealTransport;

impl Transport for IdealTransport {
    fn transmit(
        &mut self,
        states: Vec<StateVector>,
        _rng: &mut SimRng,
    ) -> Result<Vec<StateVector>, AbortReason> {
        Ok(states)
    }
}

/// Shape of one Cat state: particle count, per-particle dimension,
/// and phase/offset parameters `(ϑ₁, …, ϑ_n)` with `ϑ₁ = 0`.
///
/// Two shapes are allowed: the index phase (`dim = n`, offsets a permutation
/// of `{0,…,n−1}`) and the ballot phase (all offsets zero, any `dim ≥ 2`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatStateSpec {
    particles: usize,
    dim: usize,
    offsets: Vec<usize>,
}

impl CatStateSpec {
    /// Index-phase spec: `dim = n`, offsets mutually distinct with `ϑ₁ = 0`.
    pub fn index_phase(offsets: Vec<usize>) -> Result<Self, VoteError> {
        let n = offsets.len();
        if n < 2 {
            return Err(VoteError::InvalidSpec(format!(
                "need ≥ 2 particles, got {n}"
            )));
        }
        if offsets[0] != 0 {
            return Err(VoteError::InvalidSpec("ϑ₁ must be 0".into()));
        }
        for (i, &o) in offsets.iter().enumerate() {
            if o >= n {
                return Err(VoteError::InvalidSpec(format!(
                    "offset {o} at position {i} outside [0, {n})"
                )));
            }
            if offsets[..i].contains(&o) {
                return Err(VoteError::InvalidSpec(format!(
                    "offsets must be mutually distinct (repeat of {o})"
                )));
            }
        }
        Ok(Self {
            particles: n,
            dim: n,
            offsets,
        })
    }

    /// Ballot-phase spec: all offsets zero, `dim ≥ 2` (callers must ensure
    /// `dim ≥ T_v` for the election to be wrap-free).
    pub fn ballot_phase(particles: usize, dim: usize) -> Result<Self, VoteError> {
        if particles < 2 {
            return Err(VoteError::InvalidSpec(format!(
                "need ≥ 2 particles, got {particles}"
            )));
        }
        if dim < 2 {
            return Err(VoteError::InvalidSpec(format!("dim {dim} must be ≥ 2")));
        }
        Ok(Self {
            particles,
            dim,
            offsets: vec![0; particles],
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Builds the Cat state `(1/√dim) Σ_l ω^{l·ϑ₁} |l, l+ϑ₂, …, l+ϑ_n⟩`.
pub fn prepare_cat_state(spec: &CatStateSpec) -> Result<StateVector, VoteError> {
    let n = spec.particles;
    let d = spec.dim;
    let layout = SubsystemLayout::new(&vec![d; n])?;
    let mut amps = vec![num_complex::Complex64::ZERO; layout.total_dim()];
    let scale = 1.0 / (d as f64).sqrt();
    for l in 0..d {
        let mut flat = 0usize;
        for &offset in &spec.offsets {
            flat = flat * d + (l + offset) % d;
        }
        let phase = 2.0 * std::f64::consts::PI * (l * spec.offsets[0]) as f64 / d as f64;
        amps[flat] = num_complex::Complex64::from_polar(scale, phase);
    }
    Ok(StateVector::from_amplitudes(layout, amps)?)
}

/// A voter's stake and its quantized vote allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterProfile {
    /// Position of the voter in the electorate, `l ∈ [0, n)`.
    pub id: usize,
    /// Raw positive stake weight `w_l`.
    pub weight: f64,
    /// `w̃_l = ⌊w_l / W · T_v⌋`.
    pub quantized_weight: u32,
}

/// Quantizes stake weights into vote counts: `w̃_l = ⌊w_l / W · T_v⌋`.
///
/// The product is evaluated in `f64` with a `1e-9` nudge before the floor so
/// decimal stake fractions (0.3 of a total of 1.0, say) quantize as their
/// exact rational values dictate.
pub fn quantize_weights(weights: &[f64], t_v: u32) -> Result<Vec<u32>, VoteError> {
    if t_v < 1 {
        return Err(VoteError::InvalidWeight("T_v must be ≥ 1".into()));
    }
    if weights.is_empty() {
        return Err(VoteError::InvalidWeight("no weights given".into()));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(VoteError::InvalidWeight(format!(
                "weight {w} at position {i} is not positive and finite"
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    Ok(weights
        .iter()
        .map(|&w| (w / total * t_v as f64 + 1e-9).floor() as u32)
        .collect())
}

/// Builds voter profiles from raw weights.
pub fn voter_profiles(weights: &[f64], t_v: u32) -> Result<Vec<VoterProfile>, VoteError> {
    let quantized = quantize_weights(weights, t_v)?;
    Ok(weights
        .iter()
        .zip(quantized)
        .enumerate()
        .map(|(id, (&weight, quantized_weight))| VoterProfile {
            id,
            weight,
            quantized_weight,
        })
        .collect())
}

/// Smallest power of two ≥ `T_v + 1`: the default ballot dimension, chosen
/// so a voter's full weight never wraps mod `d`.
pub fn ballot_dim_for(t_v: u32) -> usize {
    ((t_v + 1) as usize).next_power_of_two()
}

/// Secret per-voter row indices for one candidate's ballot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyIndexSet {
    pub candidate: NodeId,
    /// `indices[l]` is voter `l`'s row; always a permutation of `{0,…,n−1}`.
    pub indices: Vec<usize>,
}

/// The pre-vote ballot matrix for one candidate: entries `r_{g,l}` indexed
/// by row `g` and voter column `l`, each in `[0, d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotMatrix {
    pub candidate: NodeId,
    pub dim: u32,
    /// `entries[g][l]`.
    pub entries: Vec<Vec<u32>>,
}

impl BallotMatrix {
    /// Wraps explicit rows, enforcing shape, entry range, and the row-sum
    /// law `Σ_l r_{g,l} ≡ 0 (mod d)`.
    pub fn from_rows(
        candidate: NodeId,
        dim: u32,
        entries: Vec<Vec<u32>>,
    ) -> Result<Self, VoteError> {
        let n = entries.len();
        if n < 2 {
            return Err(VoteError::InvalidSpec(format!(
                "ballot matrix needs ≥ 2 rows, got {n}"
            )));
        }
        for (g, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(VoteError::InvalidSpec(format!(
                    "row {g} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&e| e >= dim) {
                return Err(VoteError::InvalidSpec(format!(
                    "row {g} entry {bad} outside [0, {dim})"
                )));
            }
            let sum: u32 = row.iter().sum();
            if !sum.is_multiple_of(dim) {
                return Err(VoteError::InvalidSpec(format!(
                    "row {g} sums to {sum}, not ≡ 0 mod {dim}"
                )));
            }
        }
        Ok(Self {
            candidate,
            dim,
            entries,
        })
    }

    /// Number of rows / voters.
    pub fn voters(&self) -> usize {
        self.entries.len()
    }

    /// Voter `l`'s private column `(r_{0,l}, …, r_{n−1,l})`.
    pub fn column(&self, voter: usize) -> Vec<u32> {
        self.entries.iter().map(|row| row[voter]).collect()
    }
}

/// Prepares the two copies transmitted for one verification/use group.
///
/// The honest preparer builds both copies exactly from the disclosed spec;
/// tests and adversary models may substitute corrupted states while the
/// disclosed spec stays honest.
pub type GroupPreparer<'a> =
    dyn FnMut(usize, &CatStateSpec) -> Result<(StateVector, StateVector), VoteError> + 'a;

fn honest_pair(spec: &CatStateSpec) -> Result<(StateVector, StateVector), VoteError> {
    Ok((prepare_cat_state(spec)?, prepare_cat_state(spec)?))
}

/// Measures every particle of both copies of a group and checks them against
/// the disclosed spec: computational outcomes must reproduce the disclosed
/// offsets (up to the common shift `l`), Fourier outcomes must sum to
/// 0 mod dim. Which copy gets which basis is chosen at random.
fn verify_group(
    group: usize,
    copy_a: &StateVector,
    copy_b: &StateVector,
    disclosed: &CatStateSpec,
    rng: &mut SimRng,
) -> Result<(), AbortReason> {
    let n = disclosed.particles;
    let dim = disclosed.dim;
    let targets: Vec<usize> = (0..n).collect();
    let (comp_copy, fourier_copy) = if rng.gen::<bool>() {
        (copy_a, copy_b)
    } else {
        (copy_b, copy_a)
    };

    let fail = |detail: String| AbortReason::GroupVerificationFailed { group, detail };

    let (comp, _) = comp_copy
        .measure(&targets, MeasurementBasis::Computational, rng)
        .map_err(|e| fail(format!("computational measurement failed: {e}")))?;
    let base = comp[0];
    for (j, (&outcome, &offset)) in comp.iter().zip(disclosed.offsets()).enumerate() {
        if outcome != (base + offset) % dim {
            return Err(fail(format!(
                "computational outcome {outcome} at particle {j} inconsistent with disclosed offsets (base {base})"
            )));
        }
    }

    let (fourier, _) = fourier_copy
        .measure(&targets, MeasurementBasis::Fourier, rng)
        .map_err(|e| fail(format!("fourier measurement failed: {e}")))?;
    let sum: usize = fourier.iter().sum();
    if !sum.is_multiple_of(dim) {
        return Err(fail(format!(
            "fourier outcomes {fourier:?} sum to {sum}, not ≡ 0 mod {dim}"
        )));
    }
    Ok(())
}

/// Samples `1+δ` mutually distinct offset tuples (`ϑ₁ = 0`, remaining a
/// shuffled permutation). Falls back to independent sampling when fewer than
/// `1+δ` distinct tuples exist (only possible at n = 2).
fn sample_offset_tuples(n: usize, groups: usize, rng: &mut SimRng) -> Vec<Vec<usize>> {
    let pool: u128 = (1..n as u128).product(); // (n−1)! distinct tuples
    let enforce_distinct = pool >= groups as u128;
    let mut tuples: Vec<Vec<usize>> = Vec::with_capacity(groups);
    while tuples.len() < groups {
        let mut rest: Vec<usize> = (1..n).collect();
        rest.shuffle(rng);
        let mut tuple = Vec::with_capacity(n);
        tuple.push(0);
        tuple.extend(rest);
        if enforce_distinct && tuples.contains(&tuple) {
            continue;
        }
        tuples.push(tuple);
    }
    tuples
}

/// Splits `0..total` into a random set of `checked` verification groups and
/// the remaining use groups (ascending order).
fn split_groups(total: usize, checked: usize, rng: &mut SimRng) -> (Vec<usize>, Vec<usize>) {
    let mut all: Vec<usize> = (0..total).collect();
    all.shuffle(rng);
    let mut verify: Vec<usize> = all[..checked].to_vec();
    let mut used: Vec<usize> = all[checked..].to_vec();
    verify.sort_unstable();
    used.sort_unstable();
    (verify, used)
}

/// Runs the privacy-index protocol for one candidate and returns each
/// voter's secret row index.
///
/// `1+δ` two-copy groups are prepared with distinct offset tuples, sent
/// through the transport (which inserts decoys and applies any adversary),
/// `δ` randomly chosen groups are verified against the disclosed parameters,
/// and the remaining group is measured to yield a permutation.
pub fn distribute_indices(
    candidate: NodeId,
    n: usize,
    delta: usize,
    transport: &mut dyn Transport,
    rng: &mut SimRng,
) -> Result<PrivacyIndexSet, VoteError> {
    distribute_indices_with_preparer(candidate, n, delta, transport, &mut |_, spec| {
        honest_pair(spec)
    }, rng)
}

/// [`distribute_indices`] with an explicit group preparer (adversary hook).
pub fn distribute_indices_with_preparer(
    candidate: NodeId,
    n: usize,
    delta: usize,
    transport: &mut dyn Transport,
    preparer: &mut GroupPreparer<'_>,
    rng: &mut SimRng,
) -> Result<PrivacyIndexSet, VoteError> {
    if n < 2 {
        return Err(VoteError::InvalidSpec(format!("need ≥ 2 voters, got {n}")));
    }
    if delta < 1 {
        return Err(VoteError::InvalidSpec("δ must be ≥ 1".into()));
    }
    let groups = 1 + delta;
    let specs: Vec<CatStateSpec> = sample_offset_tuples(n, groups, rng)
        .into_iter()
        .map(CatStateSpec::index_phase)
        .collect::<Result<_, _>>()?;

    let mut outgoing = Vec::with_capacity(2 * groups);
    for (g, spec) in specs.iter().enumerate() {
        let (a, b) = preparer(g, spec)?;
        outgoing.push(a);
        outgoing.push(b);
    }
    let delivered = transport
        .transmit(outgoing, rng)
        .map_err(VoteError::ProtocolAbort)?;
    if delivered.len() != 2 * groups {
        return Err(VoteError::InvalidSpec(format!(
            "transport delivered {} states, expected {}",
            delivered.len(),
            2 * groups
        )));
    }

    let (verify, used) = split_groups(groups, delta, rng);
    for &g in &verify {
        verify_group(g, &delivered[2 * g], &delivered[2 * g + 1], &specs[g], rng)
            .map_err(VoteError::ProtocolAbort)?;
    }

    // One unverified group remains; each voter reads one copy, simulated by
    // a single joint sample revealed component-wise.
    let g = used[0];
    let copy = if rng.gen::<bool>() { 0 } else { 1 };
    let targets: Vec<usize> = (0..n).collect();
    let (indices, _) =
        delivered[2 * g + copy].measure(&targets, MeasurementBasis::Computational, rng)?;
    Ok(PrivacyIndexSet { candidate, indices })
}

/// Builds one candidate's pre-vote ballot matrix.
///
/// `n+δ` two-copy groups of the all-zero-offset Cat state (dimension `d ≥
/// T_v`, the caller's obligation) are transmitted, `δ` are verified, and each
/// remaining group is Fourier-measured to produce one matrix row.
pub fn build_ballot_box(
    candidate: NodeId,
    n: usize,
    d: u32,
    delta: usize,
    transport: &mut dyn Transport,
    rng: &mut SimRng,
) -> Result<BallotMatrix, VoteError> {
    build_ballot_box_with_preparer(candidate, n, d, delta, transport, &mut |_, spec| {
        honest_pair(spec)
    }, rng)
}

/// [`build_ballot_box`] with an explicit group preparer (adversary hook).
pub fn build_ballot_box_with_preparer(
    candidate: NodeId,
    n: usize,
    d: u32,
    delta: usize,
    transport: &mut dyn Transport,
    preparer: &mut GroupPreparer<'_>,
    rng: &mut SimRng,
) -> Result<BallotMatrix, VoteError> {
    if n < 2 {
        return Err(VoteError::InvalidSpec(format!("need ≥ 2 voters, got {n}")));
    }
    if delta < 1 {
        return Err(VoteError::InvalidSpec("δ must be ≥ 1".into()));
    }
    let spec = CatStateSpec::ballot_phase(n, d as usize)?;
    let groups = n + delta;

    let mut outgoing = Vec::with_capacity(2 * groups);
    for g in 0..groups {
        let (a, b) = preparer(g, &spec)?;
        outgoing.push(a);
        outgoing.push(b);
    }
    let delivered = transport
        .transmit(outgoing, rng)
        .map_err(VoteError::ProtocolAbort)?;
    if delivered.len() != 2 * groups {
        return Err(VoteError::InvalidSpec(format!(
            "transport delivered {} states, expected {}",
            delivered.len(),
            2 * groups
        )));
    }

    let (verify, used) = split_groups(groups, delta, rng);
    for &g in &verify {
        verify_group(g, &delivered[2 * g], &delivered[2 * g + 1], &spec, rng)
            .map_err(VoteError::ProtocolAbort)?;
    }

    let targets: Vec<usize> = (0..n).collect();
    let mut entries = Vec::with_capacity(n);
    for &g in &used {
        let copy = if rng.gen::<bool>() { 0 } else { 1 };
        let (outcomes, _) =
            delivered[2 * g + copy].measure(&targets, MeasurementBasis::Fourier, rng)?;
        entries.push(outcomes.into_iter().map(|o| o as u32).collect::<Vec<u32>>());
    }
    BallotMatrix::from_rows(candidate, d, entries)
}

/// Casts a vote: adds `vote` to the entry at the voter's secret row
/// (mod `d`), leaving every other entry untouched.
pub fn cast_vote(
    column: &[u32],
    index: usize,
    vote: u32,
    d: u32,
    quantized_weight: u32,
) -> Result<Vec<u32>, VoteError> {
    if vote > quantized_weight {
        return Err(VoteError::OverWeight {
            vote,
            allowed: quantized_weight,
        });
    }
    if index >= column.len() {
        return Err(VoteError::InvalidSpec(format!(
            "row index {index} outside column of length {}",
            column.len()
        )));
    }
    let mut updated = column.to_vec();
    updated[index] = (updated[index] + vote) % d;
    Ok(updated)
}

/// Per-candidate tally: one result per row plus the plain (un-modded) total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallySheet {
    pub candidate: NodeId,
    /// `result_g = (Σ_l r′_{g,l}) mod d`.
    pub per_row: Vec<u32>,
    /// `Σ_g result_g`.
    pub total: u32,
}

/// Sums published columns row-wise mod `d`.
///
/// With unique per-voter indices each row holds exactly one voter's vote, so
/// `result_g` reveals that vote while individual columns stay meaningless.
pub fn tally(
    candidate: NodeId,
    published_columns: &[Option<Vec<u32>>],
    d: u32,
) -> Result<TallySheet, VoteError> {
    let n = published_columns.len();
    if n < 2 {
        return Err(VoteError::InvalidSpec(format!(
            "tally needs ≥ 2 columns, got {n}"
        )));
    }
    let mut columns = Vec::with_capacity(n);
    for (voter, col) in published_columns.iter().enumerate() {
        let col = col
            .as_ref()
            .ok_or(VoteError::IncompleteBallot { voter })?;
        if col.len() != n {
            return Err(VoteError::InvalidSpec(format!(
                "voter {voter} column has {} rows, expected {n}",
                col.len()
            )));
        }
        columns.push(col);
    }
    let per_row: Vec<u32> = (0..n)
        .map(|g| columns.iter().map(|col| col[g]).sum::<u32>() % d)
        .collect();
    let total = per_row.iter().sum();
    Ok(TallySheet {
        candidate,
        per_row,
        total,
    })
}

/// Checks one voter's tally inclusion against an expected total:
/// `Σ_k result^k at row N^k_l = expected`.
pub fn verify_inclusion_total(
    expected: u32,
    voter: usize,
    index_sets: &[PrivacyIndexSet],
    tallies: &[TallySheet],
) -> bool {
    let mut sum: u64 = 0;
    for set in index_sets {
        let Some(sheet) = tallies.iter().find(|t| t.candidate == set.candidate) else {
            return false;
        };
        let Some(&row) = set.indices.get(voter) else {
            return false;
        };
        let Some(&result) = sheet.per_row.get(row) else {
            return false;
        };
        sum += result as u64;
    }
    sum == expected as u64
}

/// Checks a full-weight voter's inclusion: their indexed rows across all
/// candidates must sum to exactly `w̃_l`.
pub fn verify_inclusion(
    voter: &VoterProfile,
    index_sets: &[PrivacyIndexSet],
    tallies: &[TallySheet],
) -> bool {
    verify_inclusion_total(voter.quantized_weight, voter.id, index_sets, tallies)
}

/// Selects the top `r` candidates by total (ties broken by ascending id) and
/// returns them in a random production order.
pub fn select_representatives(
    tallies: &[TallySheet],
    r: usize,
    rng: &mut SimRng,
) -> Result<Vec<NodeId>, VoteError> {
    if r < 1 || r > tallies.len() {
        return Err(VoteError::InvalidCount {
            requested: r,
            available: tallies.len(),
        });
    }
    let mut ranked: Vec<&TallySheet> = tallies.iter().collect();
    ranked.sort_by(|a, b| b.total.cmp(&a.total).then(a.candidate.cmp(&b.candidate)));
    let mut selected: Vec<NodeId> = ranked[..r].iter().map(|t| t.candidate).collect();
    selected.shuffle(rng);
    Ok(selected)
}

/// Complete record of one election, split into what is published and what
/// only auditors may see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionTranscript {
    pub public: PublicTranscript,
    pub audit: AuditTranscript,
}

/// Publicly announced election data (indices withheld).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicTranscript {
    /// Total quantized votes `T_v`.
    pub total_votes: u32,
    /// Ballot dimension `d`.
    pub ballot_dim: u32,
    /// Verification groups per transmission.
    pub delta: usize,
    pub quantized_weights: Vec<u32>,
    pub tallies: Vec<TallySheet>,
    /// Elected representatives in production order.
    pub representatives: Vec<NodeId>,
    /// Per-voter inclusion verification outcomes.
    pub inclusion_ok: Vec<bool>,
    /// Misbehavior observed during the election, if any.
    pub flags: Vec<String>,
}

/// Auditor-only election data: everything needed to replay the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTranscript {
    /// Secret per-candidate index permutations.
    pub index_sets: Vec<PrivacyIndexSet>,
    /// Pre-vote ballot matrices.
    pub initial_matrices: Vec<BallotMatrix>,
    /// `votes[l][k]`: voter `l`'s vote for candidate `k`.
    pub votes: Vec<Vec<u32>>,
    /// Votes actually accepted per voter (over-weight attempts excluded).
    pub cast_totals: Vec<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn nid(k: u32) -> NodeId {
        NodeId(k)
    }

    /// Eq.-29-shaped fixed matrices used by the worked example.
    pub(crate) fn example_matrices() -> (BallotMatrix, BallotMatrix) {
        let m1 = BallotMatrix::from_rows(
            nid(1),
            4,
            vec![
                vec![0, 2, 0, 2],
                vec![3, 0, 2, 3],
                vec![1, 3, 1, 3],
                vec![2, 0, 2, 0],
            ],
        )
        .unwrap();
        let m2 = BallotMatrix::from_rows(
            nid(2),
            4,
            vec![
                vec![1, 1, 1, 1],
                vec![2, 3, 0, 3],
                vec![1, 3, 2, 2],
                vec![2, 3, 1, 2],
            ],
        )
        .unwrap();
        (m1, m2)
    }

    /// Runs the worked example for one candidate: fixed matrix, fixed
    /// indices, fixed votes; returns the tally.
    pub(crate) fn run_example_candidate(
        matrix: &BallotMatrix,
        indices: &[usize],
        votes: &[u32],
        weights: &[u32],
    ) -> TallySheet {
        let n = matrix.voters();
        let mut published: Vec<Option<Vec<u32>>> = vec![None; n];
        for l in 0..n {
            let column = matrix.column(l);
            let updated =
                cast_vote(&column, indices[l], votes[l], matrix.dim, weights[l]).unwrap();
            published[l] = Some(updated);
        }
        tally(matrix.candidate, &published, matrix.dim).unwrap()
    }

    #[test]
    fn cat_state_with_distinct_offsets_matches_definition() {
        // offsets (0,3,2,1), dim 4: support is {(l, l+3, l+2, l+1) mod 4}.
        let spec = CatStateSpec::index_phase(vec![0, 3, 2, 1]).unwrap();
        let state = prepare_cat_state(&spec).unwrap();
        assert!((state.norm_sq() - 1.0).abs() < 1e-12);
        let layout = state.layout().clone();
        let half = 0.5;
        for l in 0..4usize {
            let idx = layout
                .flatten(&[l, (l + 3) % 4, (l + 2) % 4, (l + 1) % 4])
                .unwrap();
            assert!((state.amplitudes()[idx].re - half).abs() < 1e-12);
        }
        let support: usize = state
            .amplitudes()
            .iter()
            .filter(|a| a.norm_sqr() > 1e-18)
            .count();
        assert_eq!(support, 4);
    }

    #[test]
    fn cat_state_all_zero_offsets_is_ghz_like() {
        let spec = CatStateSpec::ballot_phase(4, 4).unwrap();
        let state = prepare_cat_state(&spec).unwrap();
        let layout = state.layout().clone();
        for l in 0..4usize {
            let idx = layout.flatten(&[l, l, l, l]).unwrap();
            assert!((state.amplitudes()[idx].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn cat_spec_validation() {
        assert!(matches!(
            CatStateSpec::index_phase(vec![1, 0, 2, 3]),
            Err(VoteError::InvalidSpec(_))
        ));
        assert!(matches!(
            CatStateSpec::index_phase(vec![0, 2, 2, 3]),
            Err(VoteError::InvalidSpec(_))
        ));
        assert!(matches!(
            CatStateSpec::ballot_phase(1, 4),
            Err(VoteError::InvalidSpec(_))
        ));
    }

    #[test]
    fn quantization_reproduces_worked_allocations() {
        assert_eq!(
            quantize_weights(&[0.3, 0.3, 0.2, 0.2], 10).unwrap(),
            vec![3, 3, 2, 2]
        );
        assert_eq!(
            quantize_weights(&[1.0, 1.0, 1.0, 1.0], 8).unwrap(),
            vec![2, 2, 2, 2]
        );
        assert_eq!(quantize_weights(&[1.0], 7).unwrap(), vec![7]);
        assert!(matches!(
            quantize_weights(&[0.5, -0.1], 10),
            Err(VoteError::InvalidWeight(_))
        ));
        assert!(matches!(
            quantize_weights(&[0.5, 0.0], 10),
            Err(VoteError::InvalidWeight(_))
        ));
    }

    #[test]
    fn quantization_is_scale_invariant() {
        let base = [0.3, 0.3, 0.2, 0.2];
        let scaled: Vec<f64> = base.iter().map(|w| w * 737.5).collect();
        assert_eq!(
            quantize_weights(&base, 10).unwrap(),
            quantize_weights(&scaled, 10).unwrap()
        );
    }

    #[test]
    fn sum_of_quantized_weights_never_exceeds_budget() {
        let mut rng = seeded_rng(13);
        for _ in 0..200 {
            let n = rng.gen_range(2..8);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
            let t_v = rng.gen_range(1..40);
            let q = quantize_weights(&weights, t_v).unwrap();
            assert!(q.iter().sum::<u32>() <= t_v);
        }
    }

    #[test]
    fn indices_form_a_permutation() {
        let mut rng = seeded_rng(31);
        for run in 0..100 {
            let set =
                distribute_indices(nid(1), 4, 2, &mut IdealTransport, &mut rng).unwrap();
            let mut sorted = set.indices.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3], "run {run}: {:?}", set.indices);
        }
    }

    #[test]
    fn corrupted_group_detection_rates() {
        // A candidate who must corrupt the group that ends up being used
        // cannot know which groups get checked, so corrupting all of them is
        // the relevant attack: detection is certain once any corrupted group
        // is verified, beating the 1 − (1/2)^δ bound. Corrupting a single
        // group instead is caught exactly when that group lands in the
        // checked set: probability δ/(1+δ).
        let n = 4;
        let delta = 2;
        let trials = 600;
        let mut rng = seeded_rng(47);

        // Wrong-offset state: a repeated-offset tuple, disclosed as honest.
        let corrupted = || {
            let bad = CatStateSpec {
                particles: n,
                dim: n,
                offsets: vec![0, 1, 1, 2],
            };
            prepare_cat_state(&bad).unwrap()
        };

        let mut detected_all = 0;
        for _ in 0..trials {
            let result = distribute_indices_with_preparer(
                nid(1),
                n,
                delta,
                &mut IdealTransport,
                &mut |_, _| Ok((corrupted(), corrupted())),
                &mut rng,
            );
            if matches!(result, Err(VoteError::ProtocolAbort(_))) {
                detected_all += 1;
            }
        }
        let rate_all = detected_all as f64 / trials as f64;
        let bound = 1.0 - 0.5f64.powi(delta as i32);
        assert!(
            rate_all >= bound,
            "corrupt-all detection {rate_all} below 1 − (1/2)^δ = {bound}"
        );

        let mut detected_single = 0;
        for _ in 0..trials {
            let result = distribute_indices_with_preparer(
                nid(1),
                n,
                delta,
                &mut IdealTransport,
                &mut |g, spec| {
                    if g == 0 {
                        Ok((corrupted(), corrupted()))
                    } else {
                        Ok((prepare_cat_state(spec)?, prepare_cat_state(spec)?))
                    }
                },
                &mut rng,
            );
            if matches!(result, Err(VoteError::ProtocolAbort(_))) {
                detected_single += 1;
            }
        }
        // One corrupted group among 1+δ with δ checked: detection δ/(1+δ).
        let rate_single = detected_single as f64 / trials as f64;
        let expect = delta as f64 / (1.0 + delta as f64);
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(
            (rate_single - expect).abs() < 4.0 * sigma + 0.01,
            "single-corruption detection {rate_single}, expected ≈ {expect}"
        );
    }

    #[test]
    fn ballot_rows_satisfy_row_sum_law() {
        let mut rng = seeded_rng(7);
        for _ in 0..100 {
            let matrix =
                build_ballot_box(nid(2), 4, 8, 2, &mut IdealTransport, &mut rng).unwrap();
            for (g, row) in matrix.entries.iter().enumerate() {
                let sum: u32 = row.iter().sum();
                assert_eq!(sum % 8, 0, "row {g} sum {sum}");
            }
        }
    }

    #[test]
    fn ballot_entries_are_uniform() {
        // Entry (0,0) over many runs: each value of [0, d) appears with
        // frequency 1/d ± 0.05. Oracle: per-qudit Fourier measurement of the
        // GHZ-type state has a uniform single-qudit marginal, computed here
        // directly from the rotated state.
        let d = 4u32;
        let spec = CatStateSpec::ballot_phase(4, d as usize).unwrap();
        let state = prepare_cat_state(&spec).unwrap();
        let rotated = {
            let f_dag = crate::qudit::dagger(&crate::qudit::fourier_matrix(d as usize));
            state.apply_unitary(&f_dag, &[0]).unwrap()
        };
        let oracle = rotated.marginal_distribution(&[0]).unwrap();
        for &p in &oracle {
            assert!((p - 0.25).abs() < 1e-12, "analytic marginal {p}");
        }

        let mut rng = seeded_rng(19);
        let runs = 4000;
        let mut counts = vec![0usize; d as usize];
        for _ in 0..runs {
            let matrix =
                build_ballot_box(nid(1), 4, d, 1, &mut IdealTransport, &mut rng).unwrap();
            counts[matrix.entries[0][0] as usize] += 1;
        }
        for (v, &c) in counts.iter().enumerate() {
            let freq = c as f64 / runs as f64;
            assert!(
                (freq - 1.0 / d as f64).abs() < 0.05,
                "value {v} frequency {freq}"
            );
        }
    }

    #[test]
    fn cast_vote_arithmetic_and_guards() {
        let column = vec![3, 0, 2, 1];
        let updated = cast_vote(&column, 0, 2, 4, 3).unwrap();
        assert_eq!(updated, vec![1, 0, 2, 1]);
        let unchanged = cast_vote(&column, 2, 0, 4, 3).unwrap();
        assert_eq!(unchanged, column);
        assert!(matches!(
            cast_vote(&column, 1, 4, 8, 3),
            Err(VoteError::OverWeight { vote: 4, allowed: 3 })
        ));
    }

    #[test]
    fn worked_example_tallies() {
        let (m1, m2) = example_matrices();
        let weights = [3u32, 3, 2, 2];

        let t1 = run_example_candidate(&m1, &[1, 2, 3, 0], &[2, 1, 0, 1], &weights);
        assert_eq!(t1.per_row, vec![1, 2, 1, 0]);
        assert_eq!(t1.total, 4);

        let t2 = run_example_candidate(&m2, &[3, 0, 1, 2], &[1, 2, 2, 1], &weights);
        assert_eq!(t2.per_row, vec![2, 2, 1, 1]);
        assert_eq!(t2.total, 6);

        // Voter V₁ (w̃ = 3): rows 2 for C₁ and 0 for C₂ sum to 1 + 2 = 3.
        let index_sets = vec![
            PrivacyIndexSet {
                candidate: nid(1),
                indices: vec![1, 2, 3, 0],
            },
            PrivacyIndexSet {
                candidate: nid(2),
                indices: vec![3, 0, 1, 2],
            },
        ];
        let tallies = vec![t1.clone(), t2.clone()];
        let voter1 = VoterProfile {
            id: 1,
            weight: 0.3,
            quantized_weight: 3,
        };
        assert!(verify_inclusion(&voter1, &index_sets, &tallies));

        // Every voter verifies under full-weight casting.
        for (l, &w) in weights.iter().enumerate() {
            assert!(verify_inclusion_total(w, l, &index_sets, &tallies));
        }

        // Election outcome: C₂ wins with r = 1.
        let mut rng = seeded_rng(3);
        let elected = select_representatives(&tallies, 1, &mut rng).unwrap();
        assert_eq!(elected, vec![nid(2)]);
    }

    #[test]
    fn all_zero_votes_tally_to_zero() {
        let mut rng = seeded_rng(23);
        let matrix = build_ballot_box(nid(5), 4, 8, 2, &mut IdealTransport, &mut rng).unwrap();
        let published: Vec<Option<Vec<u32>>> =
            (0..4).map(|l| Some(matrix.column(l))).collect();
        let sheet = tally(nid(5), &published, 8).unwrap();
        assert_eq!(sheet.per_row, vec![0, 0, 0, 0]);
        assert_eq!(sheet.total, 0);
    }

    #[test]
    fn tally_requires_every_column() {
        let mut rng = seeded_rng(29);
        let matrix = build_ballot_box(nid(5), 4, 8, 2, &mut IdealTransport, &mut rng).unwrap();
        let mut published: Vec<Option<Vec<u32>>> =
            (0..4).map(|l| Some(matrix.column(l))).collect();
        published[2] = None;
        assert!(matches!(
            tally(nid(5), &published, 8),
            Err(VoteError::IncompleteBallot { voter: 2 })
        ));
    }

    #[test]
    fn single_entry_tamper_breaks_inclusion() {
        // Exhaustive over tamper position at n=4, d=8: bumping any published
        // entry by +1 falsifies inclusion for the voter owning that row.
        let mut rng = seeded_rng(37);
        let n = 4;
        let d = 8u32;
        let matrix = build_ballot_box(nid(9), n, d, 2, &mut IdealTransport, &mut rng).unwrap();
        let indices = vec![2usize, 0, 3, 1];
        let votes = [3u32, 1, 2, 2];
        let honest: Vec<Option<Vec<u32>>> = (0..n)
            .map(|l| Some(cast_vote(&matrix.column(l), indices[l], votes[l], d, 3).unwrap()))
            .collect();
        let index_sets = vec![PrivacyIndexSet {
            candidate: nid(9),
            indices: indices.clone(),
        }];
        let honest_tally = tally(nid(9), &honest, d).unwrap();
        for (l, &v) in votes.iter().enumerate() {
            assert!(verify_inclusion_total(v, l, &index_sets, std::slice::from_ref(&honest_tally)));
        }

        for tampered_col in 0..n {
            for tampered_row in 0..n {
                let mut published = honest.clone();
                let col = published[tampered_col].as_mut().unwrap();
                col[tampered_row] = (col[tampered_row] + 1) % d;
                let sheet = tally(nid(9), &published, d).unwrap();
                // The voter whose secret row was bumped no longer verifies.
                let victim = indices.iter().position(|&g| g == tampered_row).unwrap();
                assert!(
                    !verify_inclusion_total(
                        votes[victim],
                        victim,
                        &index_sets,
                        std::slice::from_ref(&sheet)
                    ),
                    "tamper at column {tampered_col} row {tampered_row} went unnoticed"
                );
            }
        }
    }

    #[test]
    fn representative_selection_rules() {
        let tallies = vec![
            TallySheet {
                candidate: nid(1),
                per_row: vec![0; 4],
                total: 5,
            },
            TallySheet {
                candidate: nid(2),
                per_row: vec![0; 4],
                total: 5,
            },
            TallySheet {
                candidate: nid(3),
                per_row: vec![0; 4],
                total: 9,
            },
        ];
        let mut rng = seeded_rng(1);
        // Tie between 1 and 2 broken by ascending id after 3 wins.
        let two = select_representatives(&tallies, 2, &mut rng).unwrap();
        let mut sorted = two.clone();
        sorted.sort();
        assert_eq!(sorted, vec![nid(1), nid(3)]);

        let all = select_representatives(&tallies, 3, &mut rng).unwrap();
        assert_eq!(all.len(), 3);

        assert!(matches!(
            select_representatives(&tallies, 4, &mut rng),
            Err(VoteError::InvalidCount { .. })
        ));
        assert!(matches!(
            select_representatives(&tallies, 0, &mut rng),
            Err(VoteError::InvalidCount { .. })
        ));
    }

    #[test]
    fn weight_conservation_across_candidates() {
        // Random elections: Σ_k tally totals = Σ_l votes cast.
        let mut rng = seeded_rng(53);
        for _ in 0..25 {
            let n = 4usize;
            let d = 8u32;
            let weights = [3u32, 3, 2, 2];
            let candidates = [nid(1), nid(2)];
            let mut index_sets = Vec::new();
            let mut matrices = Vec::new();
            for &c in &candidates {
                index_sets
                    .push(distribute_indices(c, n, 2, &mut IdealTransport, &mut rng).unwrap());
                matrices
                    .push(build_ballot_box(c, n, d, 2, &mut IdealTransport, &mut rng).unwrap());
            }
            // Voter l splits weight: floor(w/2) to candidate 0, rest to 1.
            let votes: Vec<[u32; 2]> = weights.iter().map(|&w| [w / 2, w - w / 2]).collect();
            let mut total_cast = 0u32;
            let mut total_tallied = 0u32;
            for (k, matrix) in matrices.iter().enumerate() {
                let published: Vec<Option<Vec<u32>>> = (0..n)
                    .map(|l| {
                        Some(
                            cast_vote(
                                &matrix.column(l),
                                index_sets[k].indices[l],
                                votes[l][k],
                                d,
                                weights[l],
                            )
                            .unwrap(),
                        )
                    })
                    .collect();
                let sheet = tally(matrix.candidate, &published, d).unwrap();
                total_tallied += sheet.total;
            }
            for v in &votes {
                total_cast += v[0] + v[1];
            }
            assert_eq!(total_cast, total_tallied);
        }
    }

    #[test]
    fn ballot_matrix_shape_validation() {
        assert!(matches!(
            BallotMatrix::from_rows(nid(1), 4, vec![vec![0, 1], vec![1, 3], vec![2, 2]]),
            Err(VoteError::InvalidSpec(_))
        ));
        assert!(matches!(
            BallotMatrix::from_rows(nid(1), 4, vec![vec![0, 1], vec![1, 3]]),
            Err(VoteError::InvalidSpec(_))
        ));
        assert!(matches!(
            BallotMatrix::from_rows(nid(1), 4, vec![vec![0, 4], vec![0, 0]]),
            Err(VoteError::InvalidSpec(_))
        ));
    }
}
