//! Hash function driven by a message-controlled two-particle quantum walk.
//!
//! Two walkers share a 4-dimensional coin on a cycle of `n_h` nodes. Each
//! message bit selects the coin operator for one step (Grover coin `C₀` for
//! bit 0, the alternative coin `C₁` for bit 1); the joint shift then moves
//! the walkers conditioned on the coin: `|00⟩` advances both, `|11⟩`
//! retreats both, and each mixed state advances the walker whose bit is 0
//! while resting the other. After all steps the joint position
//! distribution (`n_h²` probabilities, row-major) is mapped to bytes via
//! `floor(p · 10⁸) mod 256`, yielding an `n_h²`-byte digest.
//!
//! Determinism: amplitudes are evolved in double precision with a fixed
//! operation order and every probability is rounded to 12 decimal places
//! before byte extraction, so digests are reproducible across platforms.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qudit::{StateVector, SubsystemLayout};
use crate::tol;

/// Errors from hashing.
#[derive(Debug, Error, PartialEq)]
pub enum HashError {
    /// Hashing an empty message is refused: there is no bit to walk on.
    #[error("message must not be empty")]
    EmptyMessage,
    /// Parameters violate their invariants.
    #[error("invalid hash parameters: {0}")]
    InvalidParams(String),
}

/// Parameters of the hashing walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashParams {
    cycle_size: usize,
    initial_coin: [(f64, f64); 4],
    initial_positions: (usize, usize),
    min_steps: usize,
}

impl HashParams {
    /// Validates and builds parameters.
    ///
    /// `initial_coin` holds the four coin amplitudes as `(re, im)` pairs and
    /// must be normalized within 1e-9; positions must lie on the cycle.
    pub fn new(
        cycle_size: usize,
        initial_coin: [(f64, f64); 4],
        initial_positions: (usize, usize),
        min_steps: usize,
    ) -> Result<Self, HashError> {
        if cycle_size < 4 {
            return Err(HashError::InvalidParams(format!(
                "cycle size {cycle_size} must be ≥ 4"
            )));
        }
        if min_steps < 1 {
            return Err(HashError::InvalidParams("min_steps must be ≥ 1".into()));
        }
        let norm_sq: f64 = initial_coin
            .iter()
            .map(|&(re, im)| re * re + im * im)
            .sum();
        if (norm_sq - 1.0).abs() > tol::NORM {
            return Err(HashError::InvalidParams(format!(
                "coin amplitudes have squared norm {norm_sq}, need 1"
            )));
        }
        if initial_positions.0 >= cycle_size || initial_positions.1 >= cycle_size {
            return Err(HashError::InvalidParams(format!(
                "initial positions {initial_positions:?} outside cycle of size {cycle_size}"
            )));
        }
        Ok(Self {
            cycle_size,
            initial_coin,
            initial_positions,
            min_steps,
        })
    }

    /// Default-shaped parameters for a given cycle size: walkers at `0`
    /// and `1`, the [`default_initial_coin`], 16-step floor.
    pub fn for_cycle(cycle_size: usize) -> Result<Self, HashError> {
        Self::new(
            cycle_size,
            default_initial_coin(),
            (0, 1),
            DEFAULT_MIN_STEPS,
        )
    }

    /// Cycle size `n_h`; the digest is `n_h²` bytes.
    pub fn cycle_size(&self) -> usize {
        self.cycle_size
    }

    /// Digest length in bytes.
    pub fn digest_len(&self) -> usize {
        self.cycle_size * self.cycle_size
    }

    /// Walk-length floor.
    pub fn min_steps(&self) -> usize {
        self.min_steps
    }
}

/// Walk-length floor used by [`HashParams::for_cycle`].
pub const DEFAULT_MIN_STEPS: usize = 16;

/// Default initial coin amplitudes `(1, 1+i, 2−i, 3+2i)/√21`.
///
/// The coin must be generic: both coin operators are real, so a real
/// initial coin keeps every amplitude real, and symmetric choices (the
/// uniform coin above all, it is a fixed point of the Grover coin) let the
/// walk reach configurations where the two coins agree up to a global
/// sign, making some message bits invisible to the digest. Distinct
/// magnitudes and phases on every component keep the evolution away from
/// those degenerate subspaces.
pub fn default_initial_coin() -> [(f64, f64); 4] {
    let s = 21f64.sqrt().recip();
    [(s, 0.0), (s, s), (2.0 * s, -s), (3.0 * s, 2.0 * s)]
}

impl Default for HashParams {
    /// Cycle of 8 nodes: 64-byte digests.
    fn default() -> Self {
        Self::for_cycle(8).expect("default parameters are valid")
    }
}

/// Fixed-length digest produced by [`hash`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(Vec<u8>);

impl Digest {
    /// Wraps raw digest bytes.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    /// The all-zero digest of the given length (genesis predecessor).
    pub fn zero(len: usize) -> Self {
        Self(vec![0u8; len])
    }

    /// Raw bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Length in bytes.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for a zero-length digest.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses a lowercase/uppercase hex string.
    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        Ok(Self(hex::decode(s)?))
    }

    /// Lowercase hex encoding.
    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// The two 4×4 coin operators: the Grover coin `C₀` and the alternative
/// coin `C₁` (each entry ±1/2).
pub fn grover_coins() -> (Array2<Complex64>, Array2<Complex64>) {
    let h = 0.5;
    let c0 = [
        [-h, h, h, h],
        [h, -h, h, h],
        [h, h, -h, h],
        [h, h, h, -h],
    ];
    let c1 = [
        [h, h, h, h],
        [h, h, -h, -h],
        [h, -h, h, -h],
        [h, -h, -h, h],
    ];
    let build = |m: [[f64; 4]; 4]| {
        Array2::from_shape_fn((4, 4), |(i, j)| Complex64::new(m[i][j], 0.0))
    };
    (build(c0), build(c1))
}

/// MSB-first bit of a byte string.
fn message_bit(message: &[u8], index: usize) -> bool {
    let byte = message[index / 8];
    (byte >> (7 - index % 8)) & 1 == 1
}

/// Joint shift permutation. Aligned coin states move both walkers by their
/// bit (`|00⟩`: both +1, `|11⟩`: both −1); mixed states move only the
/// walker whose bit is 0 (+1) and rest the other.
///
/// The rest moves are load-bearing. If every coin state moved both walkers
/// by ±1, each walker's position parity after `t` steps would be fixed by
/// `t` alone and the pair parity would be invariant outright, pinning three
/// quarters of the joint distribution to exactly zero on an even cycle and
/// capping how much of the digest a message bit can influence. Resting
/// exactly one walker in the mixed states puts every parity combination in
/// superposition, so the whole digest carries signal.
fn joint_shift_permutation(n: usize) -> Vec<usize> {
    let mut dest = vec![0usize; n * n * 4];
    for x1 in 0..n {
        for x2 in 0..n {
            for c in 0..4 {
                let up = |x: usize| (x + 1) % n;
                let down = |x: usize| (x + n - 1) % n;
                let (y1, y2) = match c {
                    0 => (up(x1), up(x2)),
                    1 => (up(x1), x2),
                    2 => (x1, up(x2)),
                    _ => (down(x1), down(x2)),
                };
                dest[(x1 * n + x2) * 4 + c] = (y1 * n + y2) * 4 + c;
            }
        }
    }
    dest
}

/// Runs the hashing walk and returns the joint position distribution
/// (`n_h²` probabilities, row-major over walker 1 then walker 2).
pub fn final_distribution(message: &[u8], params: &HashParams) -> Result<Vec<f64>, HashError> {
    if message.is_empty() {
        return Err(HashError::EmptyMessage);
    }
    let n = params.cycle_size;
    let layout = SubsystemLayout::new(&[n, n, 4])
        .map_err(|e| HashError::InvalidParams(e.to_string()))?;
    let mut amps = vec![Complex64::ZERO; layout.total_dim()];
    let (x1, x2) = params.initial_positions;
    for (c, &(re, im)) in params.initial_coin.iter().enumerate() {
        amps[(x1 * n + x2) * 4 + c] = Complex64::new(re, im);
    }
    let mut state = StateVector::from_amplitudes(layout, amps)
        .map_err(|e| HashError::InvalidParams(e.to_string()))?;

    let (c0, c1) = grover_coins();
    let perm = joint_shift_permutation(n);
    let bit_len = message.len() * 8;
    let steps = bit_len.max(params.min_steps);
    for s in 0..steps {
        // Short messages repeat their bits until the step floor is reached.
        let coin = if message_bit(message, s % bit_len) {
            &c1
        } else {
            &c0
        };
        state = state
            .apply_unitary(coin, &[2])
            .expect("coin application is valid for a validated register");
        state = state
            .apply_permutation(&perm)
            .expect("shift permutation is valid for a validated register");
    }
    Ok(state
        .marginal_distribution(&[0, 1])
        .expect("walker subsystems exist"))
}

/// Maps probabilities to digest bytes: round to 12 decimals, then
/// `floor(p · 10⁸) mod 256` in exact integer arithmetic.
fn extract_bytes(probs: &[f64]) -> Vec<u8> {
    probs
        .iter()
        .map(|&p| {
            let q = (p * 1e12).round() as u64;
            ((q / 10_000) % 256) as u8
        })
        .collect()
}

/// Hashes a message to an `n_h²`-byte digest.
pub fn hash(message: &[u8], params: &HashParams) -> Result<Digest, HashError> {
    let probs = final_distribution(message, params)?;
    Ok(Digest(extract_bytes(&probs)))
}

/// Truncates or extends a digest to exactly `out_bits` bits.
///
/// Truncation keeps the leading bits (MSB-first) and zeroes the unused tail
/// of the final byte. Extension appends `hash(digest ‖ counter)` blocks
/// (counter as little-endian `u32`) until enough bits exist, so the original
/// digest is always a prefix of the stretched output.
pub fn stretch_digest(
    digest: &Digest,
    out_bits: usize,
    params: &HashParams,
) -> Result<Vec<u8>, HashError> {
    if out_bits == 0 {
        return Err(HashError::InvalidParams("out_bits must be ≥ 1".into()));
    }
    let mut bytes = digest.0.clone();
    let mut counter: u32 = 0;
    while bytes.len() * 8 < out_bits {
        let mut block_input = digest.0.clone();
        block_input.extend_from_slice(&counter.to_le_bytes());
        bytes.extend_from_slice(hash(&block_input, params)?.as_bytes());
        counter += 1;
    }
    let out_len = out_bits.div_ceil(8);
    bytes.truncate(out_len);
    let tail_bits = out_bits % 8;
    if tail_bits != 0 {
        let mask = !((1u16 << (8 - tail_bits)) - 1) as u8;
        bytes[out_len - 1] &= mask;
    }
    Ok(bytes)
}
