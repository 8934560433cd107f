//! Dense statevector simulation of a register of qudits.
//!
//! A register is described by a [`SubsystemLayout`] (one dimension per
//! subsystem); amplitudes are stored row-major over the subsystem indices, so
//! for dims `[d0, d1]` the flat index of `|i0, i1⟩` is `i0 * d1 + i1`.
//! States are immutable values: gates and measurements return new states.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::tol;

/// Hard ceiling on the amplitude count of any state, unless a caller raises
/// it explicitly. Keeps accidental exponential blowups from hanging a run.
pub const DEFAULT_AMPLITUDE_CAP: usize = 1 << 20;

/// Errors produced by register construction, gate application, and
/// measurement.
#[derive(Debug, Error, PartialEq)]
pub enum QuditError {
    /// A subsystem dimension is unusable or the register exceeds the cap.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    /// A subsystem or basis index is out of range or repeated.
    #[error("invalid index {index} for subsystem {subsystem} (dim {dim})")]
    InvalidIndex {
        subsystem: usize,
        index: usize,
        dim: usize,
    },
    /// Operator or amplitude-vector shape does not match the register.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// The supplied matrix is not unitary within tolerance.
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    /// Amplitudes do not form a normalized state.
    #[error("state is not normalized (squared norm {norm_sq})")]
    NotNormalized { norm_sq: f64 },
    /// A collapse or renormalization hit numerically zero weight.
    #[error("degenerate state: measurement weight vanished")]
    DegenerateState,
}

/// Measurement basis for [`StateVector::measure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementBasis {
    /// Projective measurement onto the computational basis `{|j⟩}`.
    Computational,
    /// Projective measurement onto the Fourier basis `{F|j⟩}`, realized by
    /// rotating with `F†`, measuring computationally, and rotating back.
    Fourier,
}

/// Ordered list of subsystem dimensions for a qudit register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
}

impl SubsystemLayout {
    /// Builds a layout, enforcing each dim ≥ 2 and the default amplitude cap.
    pub fn new(dims: &[usize]) -> Result<Self, QuditError> {
        Self::with_cap(dims, DEFAULT_AMPLITUDE_CAP)
    }

    /// Builds a layout with an explicit amplitude cap.
    pub fn with_cap(dims: &[usize], cap: usize) -> Result<Self, QuditError> {
        if dims.is_empty() {
            return Err(QuditError::InvalidDimension(
                "layout needs at least one subsystem".into(),
            ));
        }
        let mut total: usize = 1;
        for (i, &d) in dims.iter().enumerate() {
            if d < 2 {
                return Err(QuditError::InvalidDimension(format!(
                    "subsystem {i} has dim {d}, need ≥ 2"
                )));
            }
            total = total.checked_mul(d).ok_or_else(|| {
                QuditError::InvalidDimension("amplitude count overflows usize".into())
            })?;
        }
        if total > cap {
            return Err(QuditError::InvalidDimension(format!(
                "register needs {total} amplitudes, cap is {cap}"
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
        })
    }

    /// Dimensions of the subsystems, in register order.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of subsystems.
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    /// True when the layout has no subsystems (unreachable via constructors).
    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Total amplitude count (product of all dims).
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Row-major stride of each subsystem.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// Flattens per-subsystem indices into a row-major amplitude index.
    pub fn flatten(&self, indices: &[usize]) -> Result<usize, QuditError> {
        if indices.len() != self.dims.len() {
            return Err(QuditError::DimensionMismatch {
                expected: self.dims.len(),
                got: indices.len(),
            });
        }
        let mut flat = 0usize;
        for (subsystem, (&idx, &dim)) in indices.iter().zip(&self.dims).enumerate() {
            if idx >= dim {
                return Err(QuditError::InvalidIndex {
                    subsystem,
                    index: idx,
                    dim,
                });
            }
            flat = flat * dim + idx;
        }
        Ok(flat)
    }

    /// Validates a target list: in range and mutually distinct.
    fn check_targets(&self, targets: &[usize]) -> Result<(), QuditError> {
        if targets.is_empty() {
            return Err(QuditError::InvalidDimension(
                "target list must not be empty".into(),
            ));
        }
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.dims.len() {
                return Err(QuditError::InvalidIndex {
                    subsystem: t,
                    index: t,
                    dim: self.dims.len(),
                });
            }
            if targets[..i].contains(&t) {
                return Err(QuditError::InvalidIndex {
                    subsystem: t,
                    index: t,
                    dim: self.dims.len(),
                });
            }
        }
        Ok(())
    }
}

/// Immutable normalized statevector over a [`SubsystemLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SubsystemLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Prepares the computational basis state `|indices⟩`.
    pub fn basis(layout: SubsystemLayout, indices: &[usize]) -> Result<Self, QuditError> {
        let flat = layout.flatten(indices)?;
        let mut amps = vec![Complex64::ZERO; layout.total_dim()];
        amps[flat] = Complex64::ONE;
        Ok(Self { layout, amps })
    }

    /// Wraps raw amplitudes, enforcing length and normalization.
    pub fn from_amplitudes(
        layout: SubsystemLayout,
        amps: Vec<Complex64>,
    ) -> Result<Self, QuditError> {
        if amps.len() != layout.total_dim() {
            return Err(QuditError::DimensionMismatch {
                expected: layout.total_dim(),
                got: amps.len(),
            });
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol::NORM {
            return Err(QuditError::NotNormalized { norm_sq });
        }
        Ok(Self { layout, amps })
    }

    /// Register layout.
    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    /// Raw amplitudes, row-major over subsystem indices.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Squared norm (1 within [`tol::NORM`] for any constructed state).
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64, QuditError> {
        if self.layout != other.layout {
            return Err(QuditError::DimensionMismatch {
                expected: self.layout.total_dim(),
                got: other.layout.total_dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest per-amplitude deviation from `other`.
    pub fn max_amp_diff(&self, other: &Self) -> Result<f64, QuditError> {
        if self.layout != other.layout {
            return Err(QuditError::DimensionMismatch {
                expected: self.layout.total_dim(),
                got: other.layout.total_dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Applies a dense unitary to the listed target subsystems.
    ///
    /// The matrix must be square with dimension equal to the product of the
    /// target dims (targets in the given order, row-major) and unitary within
    /// [`tol::UNITARY_PRECONDITION`].
    pub fn apply_unitary(
        &self,
        matrix: &Array2<Complex64>,
        targets: &[usize],
    ) -> Result<Self, QuditError> {
        self.layout.check_targets(targets)?;
        let dims = self.layout.dims();
        let block: usize = targets.iter().map(|&t| dims[t]).product();
        if matrix.nrows() != block || matrix.ncols() != block {
            return Err(QuditError::DimensionMismatch {
                expected: block,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        let deviation = unitarity_deviation(matrix);
        if deviation > tol::UNITARY_PRECONDITION {
            return Err(QuditError::NotUnitary { deviation });
        }

        let strides = self.layout.strides();
        // Flat offsets of every target-coordinate combination, row-major in
        // the order the targets were given.
        let mut offsets = vec![0usize; block];
        for (combo, offset) in offsets.iter_mut().enumerate() {
            let mut rem = combo;
            let mut off = 0usize;
            for &t in targets.iter().rev() {
                off += (rem % dims[t]) * strides[t];
                rem /= dims[t];
            }
            *offset = off;
        }

        let rest: Vec<usize> = (0..dims.len()).filter(|i| !targets.contains(i)).collect();
        let mut amps = self.amps.clone();
        let mut gathered = vec![Complex64::ZERO; block];
        let mut rest_coords = vec![0usize; rest.len()];
        loop {
            let base: usize = rest_coords
                .iter()
                .zip(&rest)
                .map(|(&c, &s)| c * strides[s])
                .sum();
            for (g, &off) in gathered.iter_mut().zip(&offsets) {
                *g = amps[base + off];
            }
            for (row, &off) in offsets.iter().enumerate() {
                let mut acc = Complex64::ZERO;
                for (col, &g) in gathered.iter().enumerate() {
                    acc += matrix[(row, col)] * g;
                }
                amps[base + off] = acc;
            }
            // Mixed-radix increment over the untouched subsystems.
            let mut done = true;
            for pos in (0..rest.len()).rev() {
                rest_coords[pos] += 1;
                if rest_coords[pos] < dims[rest[pos]] {
                    done = false;
                    break;
                }
                rest_coords[pos] = 0;
            }
            if done {
                break;
            }
        }
        Ok(Self {
            layout: self.layout.clone(),
            amps,
        })
    }

    /// Relabels amplitudes along a bijection of flat indices: the amplitude
    /// at `i` moves to `dest_of_src[i]`.
    ///
    /// This applies a permutation gate (e.g. a conditional shift) without
    /// materializing the dense matrix.
    pub fn apply_permutation(&self, dest_of_src: &[usize]) -> Result<Self, QuditError> {
        let n = self.amps.len();
        if dest_of_src.len() != n {
            return Err(QuditError::DimensionMismatch {
                expected: n,
                got: dest_of_src.len(),
            });
        }
        let mut amps = vec![Complex64::ZERO; n];
        let mut seen = vec![false; n];
        for (src, &dst) in dest_of_src.iter().enumerate() {
            if dst >= n || seen[dst] {
                return Err(QuditError::InvalidIndex {
                    subsystem: 0,
                    index: dst,
                    dim: n,
                });
            }
            seen[dst] = true;
            amps[dst] = self.amps[src];
        }
        Ok(Self {
            layout: self.layout.clone(),
            amps,
        })
    }

    /// Marginal probability distribution over the target subsystems,
    /// flattened row-major in the given target order.
    pub fn marginal_distribution(&self, targets: &[usize]) -> Result<Vec<f64>, QuditError> {
        self.layout.check_targets(targets)?;
        let dims = self.layout.dims();
        let strides = self.layout.strides();
        let out_len: usize = targets.iter().map(|&t| dims[t]).product();
        let mut probs = vec![0.0f64; out_len];
        for (flat, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let mut combo = 0usize;
            for &t in targets {
                combo = combo * dims[t] + (flat / strides[t]) % dims[t];
            }
            probs[combo] += p;
        }
        Ok(probs)
    }

    /// Measures the target subsystems jointly in the given basis.
    ///
    /// Returns one outcome per target plus the post-measurement state. A
    /// Fourier measurement projects onto Fourier basis vectors, so the
    /// collapsed state is returned in the original (computational) frame.
    pub fn measure(
        &self,
        targets: &[usize],
        basis: MeasurementBasis,
        rng: &mut impl Rng,
    ) -> Result<(Vec<usize>, Self), QuditError> {
        self.layout.check_targets(targets)?;
        let dims = self.layout.dims();

        let rotated = match basis {
            MeasurementBasis::Computational => self.clone(),
            MeasurementBasis::Fourier => {
                let mut s = self.clone();
                for &t in targets {
                    let f_dag = dagger(&fourier_matrix(dims[t]));
                    s = s.apply_unitary(&f_dag, &[t])?;
                }
                s
            }
        };

        let probs = rotated.marginal_distribution(targets)?;
        let total: f64 = probs.iter().sum();
        if total <= f64::MIN_POSITIVE {
            return Err(QuditError::DegenerateState);
        }
        let draw: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut outcome_flat = probs.len() - 1;
        for (combo, &p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                outcome_flat = combo;
                break;
            }
        }
        let weight = probs[outcome_flat];
        if weight <= f64::MIN_POSITIVE {
            return Err(QuditError::DegenerateState);
        }

        // Project onto the sampled target combination and renormalize.
        let strides = self.layout.strides();
        let scale = 1.0 / weight.sqrt();
        let mut amps = rotated.amps;
        for (flat, amp) in amps.iter_mut().enumerate() {
            let mut combo = 0usize;
            for &t in targets {
                combo = combo * dims[t] + (flat / strides[t]) % dims[t];
            }
            if combo == outcome_flat {
                *amp *= scale;
            } else {
                *amp = Complex64::ZERO;
            }
        }
        let mut collapsed = Self {
            layout: self.layout.clone(),
            amps,
        };
        if basis == MeasurementBasis::Fourier {
            for &t in targets {
                let f = fourier_matrix(dims[t]);
                collapsed = collapsed.apply_unitary(&f, &[t])?;
            }
        }

        // Split the flat combo back into per-target outcomes.
        let mut outcomes = vec![0usize; targets.len()];
        let mut rem = outcome_flat;
        for (pos, &t) in targets.iter().enumerate().rev() {
            outcomes[pos] = rem % dims[t];
            rem /= dims[t];
        }
        Ok((outcomes, collapsed))
    }
}

/// Discrete Fourier transform matrix: `F[j][k] = ω^{jk} / √d`, `ω = e^{2πi/d}`.
pub fn fourier_matrix(d: usize) -> Array2<Complex64> {
    let scale = 1.0 / (d as f64).sqrt();
    Array2::from_shape_fn((d, d), |(j, k)| {
        let phase = 2.0 * std::f64::consts::PI * ((j * k) % d) as f64 / d as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Conjugate transpose.
pub fn dagger(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

/// Max-entry deviation of `M†M` from the identity.
pub fn unitarity_deviation(m: &Array2<Complex64>) -> f64 {
    let product = dagger(m).dot(m);
    let n = product.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
            worst = worst.max((product[(i, j)] - expect).norm());
        }
    }
    worst
}

/// Samples a Haar-like random state: i.i.d. complex-normal amplitudes,
/// normalized.
pub fn random_state(layout: SubsystemLayout, rng: &mut impl Rng) -> StateVector {
    let n = layout.total_dim();
    let mut amps = Vec::with_capacity(n);
    for _ in 0..n {
        amps.push(Complex64::new(standard_normal(rng), standard_normal(rng)));
    }
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    // A zero draw of every amplitude has probability zero; guard anyway.
    let scale = if norm > 0.0 { 1.0 / norm } else { 1.0 };
    for a in &mut amps {
        *a *= scale;
    }
    StateVector {
        layout,
        amps,
    }
}

/// Standard normal sample via Box-Muller on two uniform draws.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
