//! Simulator library for a blockchain whose blocks are linked by discrete-time
//! quantum-walk evolution and whose consensus runs over entangled-state voting.
//!
//! The crate is organized bottom-up:
//!
//! * [`qudit`] — dense statevector simulation of small multi-qudit registers.
//! * [`walk`] — coined discrete-time quantum walk on a cycle (step, evolve,
//!   inverse evolve).
//! * [`hash`] — a hash function built from a two-particle walk whose coin is
//!   selected per message bit.
//! * [`block`] / [`store`] — blocks carrying walk states seeded by the
//!   predecessor hash, validation by inverse evolution, and a directory-backed
//!   chain store.
//! * [`voting`] — weighted delegated-stake voting over Cat states: privacy
//!   index distribution, ballot matrices, tally, and inclusion verification.
//! * [`net`] — a deterministic multi-node harness: signatures, decoy-protected
//!   channels, adversaries, elections, production rounds, incentives, and sync.
//!
//! All stochastic behavior flows through caller-provided seeded RNGs, so every
//! simulation is reproducible from a single master seed.

pub mod block;
pub mod hash;
pub mod net;
pub mod qudit;
pub mod store;
pub mod voting;
pub mod walk;

pub use ndarray;
pub use num_complex;

/// Numeric tolerances used across the crate.
///
/// Centralized so every module agrees on what "equal" means for floats.
pub mod tol {
    /// Allowed deviation of a statevector's squared norm from 1.
    pub const NORM: f64 = 1e-9;
    /// Allowed deviation from unitarity (max entry of `M†M − I`) accepted by
    /// `apply_unitary`.
    pub const UNITARY_PRECONDITION: f64 = 1e-10;
    /// Deviation bound for exactly constructed operators (coins, shifts,
    /// Fourier matrices) in tests.
    pub const UNITARY_CONSTRUCTION: f64 = 1e-12;
    /// Minimum fidelity for a walk state to count as matching a basis state
    /// during block validation.
    pub const VALIDATION_FIDELITY: f64 = 1.0 - 1e-9;
    /// Maximum per-amplitude deviation tolerated when comparing rebuilt
    /// states against canonical block states.
    pub const SYNC_AMPLITUDE: f64 = 1e-9;
}

/// ChaCha-based RNG used for every stochastic operation in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the crate-standard RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
