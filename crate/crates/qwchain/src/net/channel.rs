//! Decoy-protected state transmission.
//!
//! The sender interleaves single-qudit decoys (random basis, random value,
//! secret positions) with the payload. The adversary, if any, acts on the
//! whole sequence without knowing which items are decoys. The receiver then
//! measures each announced decoy in its announced basis; transmission is
//! accepted only while the observed decoy error rate stays strictly below
//! the channel's threshold.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdversaryModel, NetError};
use crate::qudit::{
    random_state, MeasurementBasis, StateVector, SubsystemLayout,
};
use crate::voting::{AbortReason, Transport};
use crate::SimRng;

/// Outcome of one transmission's decoy check phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyCheckReport {
    pub decoys_total: usize,
    /// Ordinals (in decoy order) whose measured value differed.
    pub failed: Vec<usize>,
    pub error_rate: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// A point-to-point channel with decoy checking and an adversary hook.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    /// Target fraction of the transmitted sequence that is decoys.
    pub decoy_rate: f64,
    /// Dimension of each decoy qudit.
    pub decoy_dim: usize,
    /// Abort when the decoy error rate reaches this fraction.
    pub error_threshold: f64,
    /// Lower bound on inserted decoys, so short payloads stay protected.
    pub min_decoys: usize,
    pub adversary: AdversaryModel,
}

impl QuantumChannel {
    pub const DEFAULT_DECOY_RATE: f64 = 0.5;
    pub const DEFAULT_DECOY_DIM: usize = 4;
    pub const DEFAULT_ERROR_THRESHOLD: f64 = 0.05;
    pub const DEFAULT_MIN_DECOYS: usize = 16;

    pub fn new(
        decoy_rate: f64,
        decoy_dim: usize,
        error_threshold: f64,
        min_decoys: usize,
        adversary: AdversaryModel,
    ) -> Result<Self, NetError> {
        if !(decoy_rate > 0.0 && decoy_rate < 1.0) {
            return Err(NetError::InvalidConfig(format!(
                "decoy rate {decoy_rate} outside (0, 1)"
            )));
        }
        if decoy_dim < 2 {
            return Err(NetError::InvalidConfig(format!(
                "decoy dimension {decoy_dim} must be ≥ 2"
            )));
        }
        if !(error_threshold > 0.0 && error_threshold <= 1.0) {
            return Err(NetError::InvalidConfig(format!(
                "error threshold {error_threshold} outside (0, 1]"
            )));
        }
        if min_decoys < 1 {
            return Err(NetError::InvalidConfig("min_decoys must be ≥ 1".into()));
        }
        Ok(Self {
            decoy_rate,
            decoy_dim,
            error_threshold,
            min_decoys,
            adversary,
        })
    }

    /// Honest channel with default parameters.
    pub fn ideal() -> Self {
        Self::new(
            Self::DEFAULT_DECOY_RATE,
            Self::DEFAULT_DECOY_DIM,
            Self::DEFAULT_ERROR_THRESHOLD,
            Self::DEFAULT_MIN_DECOYS,
            AdversaryModel::None,
        )
        .expect("default channel parameters are valid")
    }

    /// Default channel carrying the given adversary.
    pub fn with_adversary(adversary: AdversaryModel) -> Self {
        let mut channel = Self::ideal();
        channel.adversary = adversary;
        channel
    }

    fn decoy_count(&self, payload: usize) -> usize {
        let proportional =
            (payload as f64 * self.decoy_rate / (1.0 - self.decoy_rate)).ceil() as usize;
        proportional.max(self.min_decoys)
    }
}

struct Decoy {
    basis: MeasurementBasis,
    value: usize,
}

fn prepare_decoy(dim: usize, rng: &mut SimRng) -> (Decoy, StateVector) {
    let basis = if rng.gen::<bool>() {
        MeasurementBasis::Computational
    } else {
        MeasurementBasis::Fourier
    };
    let value = rng.gen_range(0..dim);
    let layout = SubsystemLayout::new(&[dim]).expect("single-qudit layout");
    let mut amps = vec![Complex64::ZERO; dim];
    match basis {
        MeasurementBasis::Computational => amps[value] = Complex64::ONE,
        MeasurementBasis::Fourier => {
            // F|value⟩: amplitudes ω^{j·value}/√d
            let scale = 1.0 / (dim as f64).sqrt();
            for (j, amp) in amps.iter_mut().enumerate() {
                let phase = 2.0 * std::f64::consts::PI * (j * value % dim) as f64 / dim as f64;
                *amp = Complex64::from_polar(scale, phase);
            }
        }
    }
    let state = StateVector::from_amplitudes(layout, amps).expect("unit decoy state");
    (Decoy { basis, value }, state)
}

/// Measures every qudit of an item in an independently random basis and
/// forwards the collapsed state.
fn intercept_resend(item: StateVector, rng: &mut SimRng) -> StateVector {
    let subsystems = item.layout().dims().len();
    let mut state = item;
    for j in 0..subsystems {
        let basis = if rng.gen::<bool>() {
            MeasurementBasis::Computational
        } else {
            MeasurementBasis::Fourier
        };
        let (_, collapsed) = state
            .measure(&[j], basis, rng)
            .expect("in-range measurement");
        state = collapsed;
    }
    state
}

/// Sends `states` through the channel.
///
/// Returns the delivered payload and the decoy check report. The report is
/// also embedded in the [`NetError::ChannelCompromised`] error when the
/// error rate reaches the threshold, at which point the payload is
/// discarded.
pub fn transmit_with_decoys(
    channel: &QuantumChannel,
    states: Vec<StateVector>,
    rng: &mut SimRng,
) -> Result<(Vec<StateVector>, DecoyCheckReport), NetError> {
    let payload_len = states.len();
    let decoys_total = channel.decoy_count(payload_len);
    let total = payload_len + decoys_total;

    // Secret decoy positions: a random subset of slots.
    let mut slots: Vec<usize> = (0..total).collect();
    slots.shuffle(rng);
    let mut is_decoy = vec![false; total];
    for &slot in &slots[..decoys_total] {
        is_decoy[slot] = true;
    }

    let mut decoys = Vec::with_capacity(decoys_total);
    let mut sequence: Vec<StateVector> = Vec::with_capacity(total);
    let mut payload_iter = states.into_iter();
    for decoy_slot in is_decoy.iter().copied() {
        if decoy_slot {
            let (decoy, state) = prepare_decoy(channel.decoy_dim, rng);
            decoys.push(decoy);
            sequence.push(state);
        } else {
            sequence.push(payload_iter.next().expect("payload count matches slots"));
        }
    }

    // The adversary sees the whole sequence, not the decoy positions.
    match &channel.adversary {
        AdversaryModel::InterceptResend => {
            sequence = sequence
                .into_iter()
                .map(|item| intercept_resend(item, rng))
                .collect();
        }
        AdversaryModel::StateSubstitution => {
            sequence = sequence
                .into_iter()
                .map(|item| random_state(item.layout().clone(), rng))
                .collect();
        }
        AdversaryModel::None
        | AdversaryModel::BlockTamper { .. }
        | AdversaryModel::VoteForger { .. } => {}
    }

    // Check phase: positions and bases announced, decoys measured.
    let mut failed = Vec::new();
    let mut payload = Vec::with_capacity(payload_len);
    let mut decoy_ordinal = 0;
    for (slot, item) in sequence.into_iter().enumerate() {
        if is_decoy[slot] {
            let decoy = &decoys[decoy_ordinal];
            let (outcome, _) = item
                .measure(&[0], decoy.basis, rng)
                .expect("decoy measurement");
            if outcome[0] != decoy.value {
                failed.push(decoy_ordinal);
            }
            decoy_ordinal += 1;
        } else {
            payload.push(item);
        }
    }

    let error_rate = failed.len() as f64 / decoys_total as f64;
    let passed = error_rate < channel.error_threshold;
    let report = DecoyCheckReport {
        decoys_total,
        failed,
        error_rate,
        threshold: channel.error_threshold,
        passed,
    };
    if passed {
        Ok((payload, report))
    } else {
        Err(NetError::ChannelCompromised(report))
    }
}

impl Transport for QuantumChannel {
    fn transmit(
        &mut self,
        states: Vec<StateVector>,
        rng: &mut SimRng,
    ) -> Result<Vec<StateVector>, AbortReason> {
        match transmit_with_decoys(self, states, rng) {
            Ok((payload, _)) => Ok(payload),
            Err(NetError::ChannelCompromised(report)) => {
                Err(AbortReason::ChannelCompromised {
                    error_rate: report.error_rate,
                    threshold: report.threshold,
                    failed_decoys: report.failed,
                })
            }
            Err(e) => unreachable!("decoy transmission cannot fail otherwise: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use crate::voting::{prepare_cat_state, CatStateSpec};

    fn payload(rng: &mut SimRng, count: usize) -> Vec<StateVector> {
        let spec = CatStateSpec::ballot_phase(3, 4).unwrap();
        (0..count)
            .map(|_| {
                let _ = rng.gen::<u64>();
                prepare_cat_state(&spec).unwrap()
            })
            .collect()
    }

    #[test]
    fn honest_channel_delivers_intact() {
        let channel = QuantumChannel::ideal();
        let mut rng = seeded_rng(5);
        let sent = payload(&mut rng, 6);
        let (delivered, report) =
            transmit_with_decoys(&channel, sent.clone(), &mut rng).unwrap();
        assert_eq!(report.error_rate, 0.0);
        assert!(report.passed);
        assert!(report.decoys_total >= channel.min_decoys);
        assert_eq!(delivered.len(), sent.len());
        for (a, b) in delivered.iter().zip(&sent) {
            assert_eq!(a.max_amp_diff(b).unwrap(), 0.0);
        }
    }

    #[test]
    fn intercept_resend_is_caught() {
        // 20 decoys at threshold 5%: one failed decoy already aborts, so the
        // abort probability is 1 − (5/8)^20 ≈ 0.99991.
        let mut channel = QuantumChannel::with_adversary(AdversaryModel::InterceptResend);
        channel.min_decoys = 20;
        let mut rng = seeded_rng(6);
        let mut aborts = 0;
        let trials = 50;
        for _ in 0..trials {
            let sent = payload(&mut rng, 2);
            match transmit_with_decoys(&channel, sent, &mut rng) {
                Err(NetError::ChannelCompromised(report)) => {
                    assert!(!report.passed);
                    assert!(!report.failed.is_empty());
                    aborts += 1;
                }
                Ok(_) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(aborts >= trials - 1, "only {aborts}/{trials} aborted");
    }

    #[test]
    fn per_decoy_detection_rate_matches_intercept_model() {
        // d = 4: Eve guesses the right basis half the time; a wrong-basis
        // resend passes with probability 1/d. Detection = 3/8.
        let mut channel = QuantumChannel::with_adversary(AdversaryModel::InterceptResend);
        channel.min_decoys = 2000;
        channel.error_threshold = 0.9;
        let mut rng = seeded_rng(7);
        let (_, report) = transmit_with_decoys(&channel, Vec::new(), &mut rng).unwrap();
        let detection = report.failed.len() as f64 / report.decoys_total as f64;
        assert!(
            (detection - 0.375).abs() < 0.04,
            "detection {detection}, expected ≈ 0.375"
        );
    }

    #[test]
    fn detection_probability_grows_with_decoy_count() {
        let mut rng = seeded_rng(8);
        let mut rates = Vec::new();
        for &count in &[4usize, 8, 16] {
            let mut channel =
                QuantumChannel::with_adversary(AdversaryModel::InterceptResend);
            channel.min_decoys = count;
            let mut aborts = 0;
            let trials = 300;
            for _ in 0..trials {
                if transmit_with_decoys(&channel, Vec::new(), &mut rng).is_err() {
                    aborts += 1;
                }
            }
            rates.push(aborts as f64 / trials as f64);
        }
        assert!(rates[1] >= rates[0] - 0.02, "rates {rates:?} not monotone");
        assert!(rates[2] >= rates[1] - 0.02, "rates {rates:?} not monotone");
        // analytic: 1 − (5/8)^q
        for (&q, &rate) in [4usize, 8, 16].iter().zip(&rates) {
            let expect = 1.0 - 0.625f64.powi(q as i32);
            assert!((rate - expect).abs() < 0.08, "count {q}: {rate} vs {expect}");
        }
    }

    #[test]
    fn state_substitution_fails_decoy_checks() {
        let channel = QuantumChannel::with_adversary(AdversaryModel::StateSubstitution);
        let mut rng = seeded_rng(9);
        let mut aborts = 0;
        for _ in 0..20 {
            let sent = payload(&mut rng, 3);
            if transmit_with_decoys(&channel, sent, &mut rng).is_err() {
                aborts += 1;
            }
        }
        // random states pass a d = 4 decoy check with probability ~1/4, so
        // 16 decoys at threshold 5% essentially always abort
        assert_eq!(aborts, 20);
    }

    #[test]
    fn config_validation() {
        assert!(QuantumChannel::new(0.0, 4, 0.05, 16, AdversaryModel::None).is_err());
        assert!(QuantumChannel::new(0.5, 1, 0.05, 16, AdversaryModel::None).is_err());
        assert!(QuantumChannel::new(0.5, 4, 0.0, 16, AdversaryModel::None).is_err());
        assert!(QuantumChannel::new(0.5, 4, 0.05, 0, AdversaryModel::None).is_err());
    }
}
