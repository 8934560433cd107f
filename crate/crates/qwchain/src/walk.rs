//! Coined discrete-time quantum walk on a cycle of `M = 2^L` nodes.
//!
//! The register is walker ⊗ coin with layout `[M, 2]`. One step applies the
//! coin to the coin qubit, then conditionally shifts the walker: coin `|0⟩`
//! moves `x ↦ x+1 (mod M)`, coin `|1⟩` moves `x ↦ x−1 (mod M)`. Evolution is
//! implemented as `t` sequential subsystem-local steps so the cost stays
//! linear in `t · M`; dense operators are exposed only for inspection and
//! cross-checking.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qudit::{QuditError, StateVector, SubsystemLayout};

/// Parameters of the 2×2 coin
/// `[[e^{iξ}·cosθ, e^{iη}·sinθ], [e^{−iη}·sinθ, −e^{−iξ}·cosθ]]`,
/// unitary for every real `(ξ, θ, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinParams {
    pub xi: f64,
    pub theta: f64,
    pub eta: f64,
}

impl Default for CoinParams {
    /// `ξ = 0, θ = π/4, η = 0`: the coin reduces to the Hadamard gate.
    fn default() -> Self {
        Self {
            xi: 0.0,
            theta: std::f64::consts::FRAC_PI_4,
            eta: 0.0,
        }
    }
}

/// Walk instance: cycle size (a power of two) plus coin parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    position_dim: usize,
    pub coin: CoinParams,
}

impl WalkConfig {
    /// Builds a config; `position_dim` must be a power of two ≥ 2.
    pub fn new(position_dim: usize, coin: CoinParams) -> Result<Self, QuditError> {
        if position_dim < 2 || !position_dim.is_power_of_two() {
            return Err(QuditError::InvalidDimension(format!(
                "cycle size {position_dim} is not a power of two ≥ 2"
            )));
        }
        Ok(Self { position_dim, coin })
    }

    /// Cycle size `M`.
    pub fn position_dim(&self) -> usize {
        self.position_dim
    }

    /// Walker ⊗ coin register layout `[M, 2]`.
    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::new(&[self.position_dim, 2]).expect("valid by construction")
    }

    /// The localized start state `|x⟩|coin⟩`.
    pub fn basis_state(&self, position: usize, coin: usize) -> Result<StateVector, QuditError> {
        StateVector::basis(self.layout(), &[position, coin])
    }

    fn check_state(&self, state: &StateVector) -> Result<(), QuditError> {
        if state.layout().dims() != [self.position_dim, 2] {
            return Err(QuditError::DimensionMismatch {
                expected: 2 * self.position_dim,
                got: state.layout().total_dim(),
            });
        }
        Ok(())
    }
}

/// Dense coin matrix for the given parameters.
pub fn coin_matrix(params: &CoinParams) -> Array2<Complex64> {
    let (sin, cos) = params.theta.sin_cos();
    let mut m = Array2::from_elem((2, 2), Complex64::ZERO);
    m[(0, 0)] = Complex64::from_polar(cos, params.xi);
    m[(0, 1)] = Complex64::from_polar(sin, params.eta);
    m[(1, 0)] = Complex64::from_polar(sin, -params.eta);
    m[(1, 1)] = -Complex64::from_polar(cos, -params.xi);
    m
}

/// Dense conditional shift over walker ⊗ coin:
/// `S = Σ_x |x+1⟩⟨x| ⊗ |0⟩⟨0| + Σ_x |x−1⟩⟨x| ⊗ |1⟩⟨1|` (indices mod `M`).
pub fn shift_matrix(position_dim: usize) -> Result<Array2<Complex64>, QuditError> {
    if position_dim < 2 {
        return Err(QuditError::InvalidDimension(format!(
            "cycle size {position_dim} must be ≥ 2"
        )));
    }
    let n = 2 * position_dim;
    let mut m = Array2::from_elem((n, n), Complex64::ZERO);
    for x in 0..position_dim {
        let up = (x + 1) % position_dim;
        let down = (x + position_dim - 1) % position_dim;
        m[(up * 2, x * 2)] = Complex64::ONE;
        m[(down * 2 + 1, x * 2 + 1)] = Complex64::ONE;
    }
    Ok(m)
}

/// Dense one-step operator `U = S · (I ⊗ C)`: coin first, then shift.
pub fn step_operator(config: &WalkConfig) -> Array2<Complex64> {
    let coin = coin_matrix(&config.coin);
    let eye = Array2::from_diag_elem(config.position_dim, Complex64::ONE);
    let s = shift_matrix(config.position_dim).expect("valid by construction");
    s.dot(&ndarray::linalg::kron(&eye, &coin))
}

/// Flat-index permutation realizing the shift (or its inverse).
fn shift_permutation(position_dim: usize, inverse: bool) -> Vec<usize> {
    let mut dest = vec![0usize; 2 * position_dim];
    for x in 0..position_dim {
        let (up, down) = if inverse {
            (
                (x + position_dim - 1) % position_dim,
                (x + 1) % position_dim,
            )
        } else {
            ((x + 1) % position_dim, (x + position_dim - 1) % position_dim)
        };
        dest[x * 2] = up * 2;
        dest[x * 2 + 1] = down * 2 + 1;
    }
    dest
}

/// Applies `t` walk steps to a walker ⊗ coin state.
pub fn evolve(state: &StateVector, config: &WalkConfig, steps: u32) -> Result<StateVector, QuditError> {
    config.check_state(state)?;
    let coin = coin_matrix(&config.coin);
    let perm = shift_permutation(config.position_dim, false);
    let mut current = state.clone();
    for _ in 0..steps {
        current = current.apply_unitary(&coin, &[1])?;
        current = current.apply_permutation(&perm)?;
    }
    Ok(current)
}

/// Applies `t` inverse walk steps: per step undo the shift, then the coin.
pub fn inverse_evolve(
    state: &StateVector,
    config: &WalkConfig,
    steps: u32,
) -> Result<StateVector, QuditError> {
    config.check_state(state)?;
    let coin_dag = crate::qudit::dagger(&coin_matrix(&config.coin));
    let perm = shift_permutation(config.position_dim, true);
    let mut current = state.clone();
    for _ in 0..steps {
        current = current.apply_permutation(&perm)?;
        current = current.apply_unitary(&coin_dag, &[1])?;
    }
    Ok(current)
}

/// Probability of each walker position (marginal over the coin).
pub fn position_distribution(state: &StateVector) -> Result<Vec<f64>, QuditError> {
    state.marginal_distribution(&[0])
}
