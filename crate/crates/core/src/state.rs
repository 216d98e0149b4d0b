//! Density-operator states on small tensor-product Hilbert spaces.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Default tolerance on the trace and Hermiticity defects of a state.
pub const STATE_TOL: f64 = 1e-10;
/// Physical states may dip this far below zero through numerical noise.
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// Density operator together with the list of subsystem dimensions.
///
/// Subsystem ordering is fixed as |q_Yb q_Ba> with the Yb qubit most
/// significant; when a phonon mode is present its index is appended last.
#[derive(Clone, Debug)]
pub struct QuantumState {
    dims: Vec<usize>,
    rho: ComplexMatrix,
}

impl QuantumState {
    /// Validates trace and Hermiticity at the default tolerances.
    /// Positivity is checked separately by [`QuantumState::check_positive`]
    /// because it needs an eigensolve.
    pub fn new(dims: Vec<usize>, rho: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(dims, rho, STATE_TOL)
    }

    /// Same with a caller-chosen tolerance on the trace and Hermiticity
    /// defects.
    pub fn with_tolerance(dims: Vec<usize>, rho: ComplexMatrix, tol: f64) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if dim == 0 || rho.rows() != dim || rho.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{} but subsystem dims {:?} give {}",
                rho.rows(),
                rho.cols(),
                dims,
                dim
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::OutOfRange(format!("state trace {} != 1", tr)));
        }
        if !rho.is_hermitian(tol) {
            return Err(Error::OutOfRange("state is not Hermitian".into()));
        }
        Ok(Self { dims, rho })
    }

    /// Pure state |psi><psi| from an amplitude vector (normalized here).
    pub fn pure(dims: Vec<usize>, amplitudes: &[C64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::OutOfRange("zero state vector".into()));
        }
        let n = amplitudes.len();
        let rho = ComplexMatrix::from_fn(n, n, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / (norm * norm)
        });
        Self::new(dims, rho)
    }

    /// Two-qubit |00>.
    pub fn ground_two_qubit() -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 4];
        amps[0] = C64::new(1.0, 0.0);
        Self::pure(vec![2, 2], &amps).unwrap()
    }

    /// The target entangled state (|00> + i|11>)/sqrt(2).
    pub fn ideal_entangled() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = vec![
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, s),
        ];
        Self::pure(vec![2, 2], &amps).unwrap()
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        let rho = ComplexMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0));
        Self::new(dims, rho).unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.rho.rows()
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    /// Construct without the trace/Hermiticity gate; for internal evolution
    /// steps that preserve both by construction.
    pub(crate) fn from_parts_unchecked(dims: Vec<usize>, rho: ComplexMatrix) -> Self {
        Self { dims, rho }
    }

    /// Smallest eigenvalue check; physical states satisfy
    /// lambda_min >= -1e-9 up to numerical noise.
    pub fn check_positive(&self) -> Result<f64> {
        let (vals, _) = self.rho.hermitian_eigen()?;
        let min = vals.first().copied().unwrap_or(0.0);
        if min < EIGENVALUE_FLOOR {
            return Err(Error::OutOfRange(format!(
                "state has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(min)
    }

    /// Diagonal of rho in the computational basis, clamped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.rho[(i, i)].re.max(0.0))
            .collect()
    }

    /// rho -> U rho U†.
    pub fn evolve(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.rows() != self.dim() || u.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {}x{}, state dimension {}",
                u.rows(),
                u.cols(),
                self.dim()
            )));
        }
        let rho = u.mul(&self.rho).mul(&u.dagger());
        Ok(Self::from_parts_unchecked(self.dims.clone(), rho))
    }

    /// Trace out the last subsystem.
    pub fn trace_out_last(&self) -> Result<Self> {
        if self.dims.len() < 2 {
            return Err(Error::DimensionMismatch(
                "cannot trace out the only subsystem".into(),
            ));
        }
        let last = *self.dims.last().unwrap();
        let keep: usize = self.dims[..self.dims.len() - 1].iter().product();
        let rho = ComplexMatrix::from_fn(keep, keep, |i, j| {
            (0..last)
                .map(|k| self.rho[(i * last + k, j * last + k)])
                .sum()
        });
        Ok(Self::from_parts_unchecked(
            self.dims[..self.dims.len() - 1].to_vec(),
            rho,
        ))
    }
}

/// `<O>` = Tr(rho O). The imaginary part is numerical noise for Hermitian O
/// and is discarded.
pub fn expectation(state: &QuantumState, observable: &ComplexMatrix) -> Result<f64> {
    if observable.rows() != state.dim() || observable.cols() != state.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{}, state dimension {}",
            observable.rows(),
            observable.cols(),
            state.dim()
        )));
    }
    let n = state.dim();
    let mut tr = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            tr += state.rho()[(i, k)] * observable[(k, i)];
        }
    }
    debug_assert!(
        tr.im.abs() < 1e-9,
        "expectation has imaginary part {}",
        tr.im
    );
    Ok(tr.re)
}

/// rho -> (1-p) rho + p I/d.
pub fn apply_depolarizing(state: &QuantumState, p: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!(
            "depolarizing p = {p} not in [0,1]"
        )));
    }
    let d = state.dim();
    let mixed = ComplexMatrix::identity(d).scale(C64::new(p / d as f64, 0.0));
    let rho = state.rho().scale(C64::new(1.0 - p, 0.0)).add(&mixed);
    Ok(QuantumState::from_parts_unchecked(
        state.dims().to_vec(),
        rho,
    ))
}
