//! Molmer-Sorensen entangling dynamics on the axial out-of-phase mode.
//!
//! The interaction-picture Hamiltonian on one motional mode in the
//! Lamb-Dicke regime is
//!
//! ```text
//! H(t) = (Omega/2) (sx x I + I x sx) (a e^{-i w t} + a† e^{i w t}) ,
//! ```
//!
//! with w = 2 pi delta the sideband detuning and Omega = 2 pi f_sb the
//! sideband Rabi frequency (angular, rad/us). Evolution is fixed-step
//! unitary propagation: the collective spin operator is diagonal in the
//! x product basis (eigenvalues m = 2, 0, 0, -2), so each step needs only
//! the exact exponential of the phonon quadrature, conjugated by number-
//! operator phases. The loop closes at t = 1/delta and the gate reaches a
//! maximally entangled state when f_sb = delta / 2.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::state::QuantumState;

/// Acceptable leakage into the top Fock level before the truncation is
/// declared inadequate.
pub const LEAKAGE_LIMIT: f64 = 1e-4;

/// Physical and numerical parameters of the gate simulation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsParams {
    /// Sideband detuning delta (kHz).
    pub detuning_khz: f64,
    /// Gate duration (us); 1/delta closes the phase-space loop.
    pub gate_time_us: f64,
    /// Axial out-of-phase mode frequency (MHz); bookkeeping only.
    pub mode_freq_mhz: f64,
    /// Sideband Rabi frequency (kHz); delta/2 gives the maximally
    /// entangling gate.
    pub sideband_rabi_khz: f64,
    /// Fock-space cutoff; levels 0..=n_max are kept.
    pub n_max: usize,
    /// Initial thermal occupation of the driven (OOP) mode.
    pub nbar_oop: f64,
    /// Thermal occupation of the spectator in-phase mode; its effect is
    /// modeled by `drift_dephasing_khz`, not as a second quantized mode.
    pub nbar_ip: f64,
    /// Exponential decay rate of each ion's coherence during the gate
    /// (kHz); zero for the ideal gate.
    pub drift_dephasing_khz: f64,
    /// Integration step (us), clamped to at most 0.1.
    pub step_us: f64,
}

impl MsParams {
    /// Ideal closed-loop gate at the given detuning: t = 1/delta,
    /// f_sb = delta/2, zero temperature, no drift.
    pub fn ideal(detuning_khz: f64) -> Self {
        Self {
            detuning_khz,
            gate_time_us: 1.0e3 / detuning_khz,
            mode_freq_mhz: 1.67,
            sideband_rabi_khz: detuning_khz / 2.0,
            n_max: 10,
            nbar_oop: 0.0,
            nbar_ip: 0.0,
            drift_dephasing_khz: 0.0,
            step_us: 0.01,
        }
    }

    /// Default experimental parameters: delta = 22 kHz, 45.4 us gate,
    /// f_z = 1.67 MHz, nbar_OOP = 0.04, nbar_IP = 0.11.
    pub fn experiment_defaults() -> Self {
        Self {
            detuning_khz: 22.0,
            gate_time_us: 45.4,
            mode_freq_mhz: 1.67,
            sideband_rabi_khz: 11.0,
            n_max: 15,
            nbar_oop: 0.04,
            nbar_ip: 0.11,
            drift_dephasing_khz: 0.0,
            step_us: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.detuning_khz <= 0.0 || self.sideband_rabi_khz <= 0.0 {
            return Err(Error::OutOfRange(
                "detuning and sideband Rabi frequency must be positive".into(),
            ));
        }
        if self.gate_time_us < 0.0 {
            return Err(Error::OutOfRange("gate time must be nonnegative".into()));
        }
        if !(0.0..1e3).contains(&self.nbar_oop) {
            return Err(Error::OutOfRange(format!("nbar_oop = {}", self.nbar_oop)));
        }
        if self.step_us <= 0.0 {
            return Err(Error::OutOfRange("step must be positive".into()));
        }
        let needed = 5.0 * self.nbar_oop + 5.0;
        if (self.n_max as f64) < needed {
            return Err(Error::Truncation(format!(
                "n_max = {} below the required {:.1} (5*nbar + 5)",
                self.n_max, needed
            )));
        }
        Ok(())
    }

    /// Sideband detuning as an angular frequency in rad/us.
    fn omega_detuning(&self) -> f64 {
        TAU * self.detuning_khz * 1e-3
    }

    /// Sideband Rabi frequency as an angular frequency in rad/us.
    fn omega_rabi(&self) -> f64 {
        TAU * self.sideband_rabi_khz * 1e-3
    }

    fn dephasing_rate_per_us(&self) -> f64 {
        self.drift_dephasing_khz * 1e-3
    }
}

/// Populations of the four two-qubit basis states along the evolution.
#[derive(Clone, Debug)]
pub struct EvolutionTrace {
    pub times_us: Vec<f64>,
    pub p00: Vec<f64>,
    pub p01: Vec<f64>,
    pub p10: Vec<f64>,
    pub p11: Vec<f64>,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    /// Largest deviation of sum(P) from 1 over the trace.
    pub fn normalization_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.p00[i] + self.p01[i] + self.p10[i] + self.p11[i] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_us,p00,p01,p10,p11\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.6},{:.9},{:.9},{:.9},{:.9}\n",
                self.times_us[i], self.p00[i], self.p01[i], self.p10[i], self.p11[i]
            ));
        }
        out
    }
}

/// Parity scan: analysis-pulse phases, measured parity values, and the
/// fitted oscillation contrast.
#[derive(Clone, Debug)]
pub struct ParityScan {
    pub phases: Vec<f64>,
    pub parities: Vec<f64>,
    pub contrast: f64,
}

impl ParityScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase_rad,parity\n");
        for (phi, p) in self.phases.iter().zip(&self.parities) {
            out.push_str(&format!("{:.6},{:.9}\n", phi, p));
        }
        out
    }
}

/// Thermal Fock distribution truncated at n_max and renormalized.
pub fn thermal_fock_distribution(nbar: f64, n_max: usize) -> Vec<f64> {
    if nbar <= 0.0 {
        let mut p = vec![0.0; n_max + 1];
        p[0] = 1.0;
        return p;
    }
    let ratio = nbar / (1.0 + nbar);
    let mut p: Vec<f64> = (0..=n_max).map(|n| ratio.powi(n as i32)).collect();
    let norm: f64 = p.iter().sum();
    for x in &mut p {
        *x /= norm;
    }
    p
}

/// Hadamard transform on both qubits: columns are the sigma_x product
/// eigenstates |++>, |+->, |-+>, |--> expressed in the z basis.
fn spin_x_basis() -> ComplexMatrix {
    let h = ComplexMatrix::from_rows(&[
        vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)],
        vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)],
    ]);
    h.kron(&h)
}

/// Density matrix in the (spin-x product basis) x (Fock basis), stored as a
/// 4x4 grid of phonon-sized blocks.
struct BlockState {
    n: usize,
    blocks: Vec<ComplexMatrix>,
}

impl BlockState {
    fn initial(n: usize, thermal: &[f64]) -> Self {
        // |00> has amplitude 1/2 on every spin-x basis state.
        let mut blocks = Vec::with_capacity(16);
        for _s in 0..4 {
            for _sp in 0..4 {
                let mut b = ComplexMatrix::zeros(n, n);
                for (m, p) in thermal.iter().enumerate() {
                    b[(m, m)] = C64::new(0.25 * p, 0.0);
                }
                blocks.push(b);
            }
        }
        Self { n, blocks }
    }

    fn block(&self, s: usize, sp: usize) -> &ComplexMatrix {
        &self.blocks[4 * s + sp]
    }

    fn block_mut(&mut self, s: usize, sp: usize) -> &mut ComplexMatrix {
        &mut self.blocks[4 * s + sp]
    }

    /// Apply the block-diagonal step unitary: rho_{s s'} <- U_s rho U_{s'}†
    /// with U for m = +2 given and U(m=-2) = U(m=+2)†, U(m=0) = I.
    fn apply_step(&mut self, u_plus: &ComplexMatrix) {
        let u_minus = u_plus.dagger();
        let u_for = |s: usize| -> Option<&ComplexMatrix> {
            match s {
                0 => Some(u_plus),
                3 => Some(&u_minus),
                _ => None,
            }
        };
        for s in 0..4 {
            for sp in 0..4 {
                let left = u_for(s);
                let right = u_for(sp);
                if left.is_none() && right.is_none() {
                    continue;
                }
                let mut b = self.block(s, sp).clone();
                if let Some(u) = left {
                    b = u.mul(&b);
                }
                if let Some(u) = right {
                    b = b.mul(&u.dagger());
                }
                *self.block_mut(s, sp) = b;
            }
        }
    }

    /// Pure dephasing of one ion: rho <- (1-q) rho + q Z rho Z. In the
    /// spin-x basis Z acts as a bit flip on the ion's index.
    fn dephase(&mut self, ion_bit: usize, q: f64) {
        if q <= 0.0 {
            return;
        }
        let flip = |s: usize| s ^ ion_bit;
        let old = self.blocks.clone();
        for s in 0..4 {
            for sp in 0..4 {
                let kept = &old[4 * s + sp];
                let flipped = &old[4 * flip(s) + flip(sp)];
                self.blocks[4 * s + sp] = kept
                    .scale(C64::new(1.0 - q, 0.0))
                    .add(&flipped.scale(C64::new(q, 0.0)));
            }
        }
    }

    /// Traces of all 16 blocks; everything reduced to the two qubits
    /// follows from these.
    fn block_traces(&self) -> [[C64; 4]; 4] {
        let mut t = [[C64::new(0.0, 0.0); 4]; 4];
        for (s, row) in t.iter_mut().enumerate() {
            for (sp, entry) in row.iter_mut().enumerate() {
                *entry = self.block(s, sp).trace();
            }
        }
        t
    }

    /// z-basis populations P00, P01, P10, P11.
    fn populations(&self, w: &ComplexMatrix) -> [f64; 4] {
        let t = self.block_traces();
        let mut p = [0.0; 4];
        for (k, pk) in p.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..4 {
                for sp in 0..4 {
                    acc += w[(k, s)] * w[(k, sp)].conj() * t[s][sp];
                }
            }
            *pk = acc.re;
        }
        p
    }

    /// Total population of the top Fock level.
    fn top_level_population(&self) -> f64 {
        (0..4)
            .map(|s| self.block(s, s)[(self.n - 1, self.n - 1)].re)
            .sum()
    }

    /// Reduced two-qubit density matrix in the z basis.
    fn reduced_qubits(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let t = self.block_traces();
        ComplexMatrix::from_fn(4, 4, |k, kp| {
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..4 {
                for sp in 0..4 {
                    acc += w[(k, s)] * w[(kp, sp)].conj() * t[s][sp];
                }
            }
            acc
        })
    }

    /// Full (2 x 2 x phonon) density matrix in the z basis.
    fn full_state(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let n = self.n;
        let mut rho = ComplexMatrix::zeros(4 * n, 4 * n);
        for k in 0..4 {
            for kp in 0..4 {
                let mut weight = ComplexMatrix::zeros(n, n);
                for s in 0..4 {
                    for sp in 0..4 {
                        let c = w[(k, s)] * w[(kp, sp)].conj();
                        if c.norm_sqr() > 0.0 {
                            weight = weight.add(&self.block(s, sp).scale(c));
                        }
                    }
                }
                for m in 0..n {
                    for mp in 0..n {
                        rho[(k * n + m, kp * n + mp)] = weight[(m, mp)];
                    }
                }
            }
        }
        rho
    }
}

struct Stepper {
    params: MsParams,
    n: usize,
    w: ComplexMatrix,
    /// Eigenpairs of the truncated quadrature a + a†.
    quad_vals: Vec<f64>,
    quad_vecs: ComplexMatrix,
    state: BlockState,
    t: f64,
}

impl Stepper {
    fn new(params: &MsParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_max + 1;
        let mut quad = ComplexMatrix::zeros(n, n);
        for m in 0..(n - 1) {
            let v = ((m + 1) as f64).sqrt();
            quad[(m, m + 1)] = C64::new(v, 0.0);
            quad[(m + 1, m)] = C64::new(v, 0.0);
        }
        let (quad_vals, quad_vecs) = quad.hermitian_eigen()?;
        let thermal = thermal_fock_distribution(params.nbar_oop, params.n_max);
        Ok(Self {
            params: params.clone(),
            n,
            w: spin_x_basis(),
            quad_vals,
            quad_vecs,
            state: BlockState::initial(n, &thermal),
            t: 0.0,
        })
    }

    /// exp(-i dt Omega (a e^{-i w tm} + a† e^{i w tm})) for the spin
    /// eigenvalue m = +2, built by conjugating the quadrature exponential
    /// with number-operator phases.
    fn plus_branch_unitary(&self, t_mid: f64, dt: f64) -> ComplexMatrix {
        let omega = self.params.omega_rabi();
        let wdet = self.params.omega_detuning();
        let n = self.n;
        let mut diag = ComplexMatrix::zeros(n, n);
        for (i, lambda) in self.quad_vals.iter().enumerate() {
            diag[(i, i)] = C64::from_polar(1.0, -dt * omega * lambda);
        }
        let base = self.quad_vecs.mul(&diag).mul(&self.quad_vecs.dagger());
        // R(t) = e^{i w t N} rotates the quadrature into a e^{-iwt} + h.c.
        let mut rotated = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let phase = C64::from_polar(1.0, wdet * t_mid * (i as f64 - j as f64));
                rotated[(i, j)] = phase * base[(i, j)];
            }
        }
        rotated
    }

    fn step(&mut self, dt: f64) {
        let t_mid = self.t + dt / 2.0;
        let u = self.plus_branch_unitary(t_mid, dt);
        self.state.apply_step(&u);
        let gamma = self.params.dephasing_rate_per_us();
        if gamma > 0.0 {
            let q = 0.5 * (1.0 - (-gamma * dt).exp());
            self.state.dephase(2, q); // Yb bit
            self.state.dephase(1, q); // Ba bit
        }
        self.t += dt;
    }

    fn advance_to(&mut self, t_target: f64) {
        let dt_max = self.params.step_us.min(0.1);
        while self.t < t_target - 1e-12 {
            let dt = dt_max.min(t_target - self.t);
            self.step(dt);
        }
    }

    fn check_truncation(&self) -> Result<()> {
        let leak = self.state.top_level_population();
        if leak > LEAKAGE_LIMIT {
            return Err(Error::Truncation(format!(
                "top Fock level population {leak:.2e} exceeds {LEAKAGE_LIMIT:.0e}; raise n_max"
            )));
        }
        Ok(())
    }
}

/// Evolve |00> x thermal under the M-S interaction for `t_us` and return the
/// full two-qubit x phonon state.
pub fn ms_evolve(params: &MsParams, t_us: f64) -> Result<QuantumState> {
    if t_us < 0.0 {
        return Err(Error::OutOfRange(
            "evolution time must be nonnegative".into(),
        ));
    }
    let mut stepper = Stepper::new(params)?;
    stepper.advance_to(t_us);
    stepper.check_truncation()?;
    let rho = renormalize(stepper.state.full_state(&stepper.w));
    QuantumState::new(vec![2, 2, stepper.n], rho)
}

/// Divide out the residual trace drift accumulated over many steps; the
/// drift is bounded by the propagator unitarity defect per step.
fn renormalize(rho: ComplexMatrix) -> ComplexMatrix {
    let tr = rho.trace().re;
    rho.scale(C64::new(1.0 / tr, 0.0))
}

/// Same as [`ms_evolve`] with the phonon mode traced out.
pub fn ms_evolve_qubits(params: &MsParams, t_us: f64) -> Result<QuantumState> {
    if t_us < 0.0 {
        return Err(Error::OutOfRange(
            "evolution time must be nonnegative".into(),
        ));
    }
    let mut stepper = Stepper::new(params)?;
    stepper.advance_to(t_us);
    stepper.check_truncation()?;
    let rho = renormalize(stepper.state.reduced_qubits(&stepper.w));
    QuantumState::new(vec![2, 2], rho)
}

/// Populations at the requested times (must be ascending).
pub fn evolution_trace(params: &MsParams, times_us: &[f64]) -> Result<EvolutionTrace> {
    if times_us.windows(2).any(|w| w[1] < w[0]) || times_us.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::OutOfRange(
            "trace times must be ascending and nonnegative".into(),
        ));
    }
    let mut stepper = Stepper::new(params)?;
    let mut trace = EvolutionTrace {
        times_us: Vec::with_capacity(times_us.len()),
        p00: Vec::new(),
        p01: Vec::new(),
        p10: Vec::new(),
        p11: Vec::new(),
    };
    for &t in times_us {
        stepper.advance_to(t);
        let p = stepper.state.populations(&stepper.w);
        trace.times_us.push(t);
        trace.p00.push(p[0]);
        trace.p01.push(p[1]);
        trace.p10.push(p[2]);
        trace.p11.push(p[3]);
    }
    stepper.check_truncation()?;
    Ok(trace)
}

/// Convergence probe: max absolute population change at `t_us` when the
/// integration step is halved.
pub fn step_halving_defect(params: &MsParams, t_us: f64) -> Result<f64> {
    let coarse = ms_evolve_qubits(params, t_us)?;
    let mut fine_params = params.clone();
    fine_params.step_us = params.step_us / 2.0;
    let fine = ms_evolve_qubits(&fine_params, t_us)?;
    let pc = coarse.probabilities();
    let pf = fine.probabilities();
    Ok(pc
        .iter()
        .zip(&pf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Analysis rotations R(pi/2, phi) on both ions followed by the parity
/// P11 + P00 - P10 - P01, for each phase; the contrast is fitted as the
/// amplitude of a sinusoid in 2 phi.
pub fn parity_scan(state: &QuantumState, phases: &[f64]) -> Result<ParityScan> {
    if state.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "parity scan needs a two-qubit state, got dims {:?}",
            state.dims()
        )));
    }
    if phases.len() < 8 {
        return Err(Error::FitRefused {
            min: 8,
            got: phases.len(),
        });
    }
    let parities: Vec<f64> = phases
        .iter()
        .map(|&phi| {
            let r = crate::observable::rotation(PI / 2.0, phi);
            let u = r.kron(&r);
            let rotated = state.evolve(&u).expect("dimension checked above");
            let p = rotated.probabilities();
            p[0] + p[3] - p[1] - p[2]
        })
        .collect();
    let contrast = fit_sinusoid_amplitude(phases, &parities);
    Ok(ParityScan {
        phases: phases.to_vec(),
        parities,
        contrast,
    })
}

/// Least-squares amplitude of y = c0 + A cos(2 phi) + B sin(2 phi);
/// returns sqrt(A^2 + B^2), half the peak-to-peak swing.
fn fit_sinusoid_amplitude(phases: &[f64], values: &[f64]) -> f64 {
    let n = phases.len();
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for i in 0..n {
        let basis = [1.0, (2.0 * phases[i]).cos(), (2.0 * phases[i]).sin()];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += basis[r] * basis[c];
            }
            atb[r] += basis[r] * values[i];
        }
    }
    // 3x3 Gaussian elimination with partial pivoting.
    let mut m = [[0.0f64; 4]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&ata[r]);
        m[r][3] = atb[r];
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        if m[col][col].abs() < 1e-12 {
            return 0.0;
        }
        for r in (col + 1)..3 {
            let f = m[r][col] / m[col][col];
            let pivot_row = m[col];
            for c in col..4 {
                m[r][c] -= f * pivot_row[c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = m[r][3];
        for c in (r + 1)..3 {
            acc -= m[r][c] * x[c];
        }
        x[r] = acc / m[r][r];
    }
    (x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Entanglement fidelity estimate (P00 + P11 + contrast) / 2.
pub fn fidelity_bound(p00_plus_p11: f64, contrast: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p00_plus_p11) {
        return Err(Error::OutOfRange(format!("population sum {p00_plus_p11}")));
    }
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::OutOfRange(format!("contrast {contrast}")));
    }
    Ok((p00_plus_p11 + contrast) / 2.0)
}

/// Best fidelity of a two-qubit state to the family
/// (|00> + e^{i chi}|11>)/sqrt(2); returns (fidelity, chi at the optimum).
pub fn bell_fidelity(state: &QuantumState) -> Result<(f64, f64)> {
    if state.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(
            "bell_fidelity needs a two-qubit state".into(),
        ));
    }
    let rho = state.rho();
    let p = (rho[(0, 0)].re + rho[(3, 3)].re) / 2.0;
    let coherence = rho[(0, 3)];
    Ok((p + coherence.norm(), -coherence.arg()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPIN_EIGENVALUES: [f64; 4] = [2.0, 0.0, 0.0, -2.0];

    /// Exact closed-form reduced two-qubit state of the M-S evolution with
    /// an (untruncated) thermal mode: in the spin-x basis,
    ///
    ///   rho_{s s'} = (1/4) e^{i theta (m^2 - m'^2)}
    ///                exp(-(m - m')^2 |alpha|^2 (2 nbar + 1) / 2) ,
    ///
    /// with alpha(t) = -(Omega / 2w)(e^{iwt} - 1) and
    /// theta(t) = (Omega/2)^2 (w t - sin w t)/w^2.
    fn closed_form_qubit_state(params: &MsParams, t_us: f64) -> ComplexMatrix {
        let w = params.omega_detuning();
        let omega = params.omega_rabi();
        let alpha_sq = (omega / w).powi(2) * (w * t_us / 2.0).sin().powi(2);
        let theta = (omega / 2.0).powi(2) * (w * t_us - (w * t_us).sin()) / (w * w);
        let damp = alpha_sq * (2.0 * params.nbar_oop + 1.0) / 2.0;
        let mut rho_x = ComplexMatrix::zeros(4, 4);
        for s in 0..4 {
            for sp in 0..4 {
                let m = SPIN_EIGENVALUES[s];
                let mp = SPIN_EIGENVALUES[sp];
                let phase = C64::from_polar(1.0, theta * (m * m - mp * mp));
                let decay = (-(m - mp).powi(2) * damp).exp();
                rho_x[(s, sp)] = phase * C64::new(0.25 * decay, 0.0);
            }
        }
        let wmat = spin_x_basis();
        wmat.mul(&rho_x).mul(&wmat.dagger())
    }

    fn populations(rho: &ComplexMatrix) -> [f64; 4] {
        [
            rho[(0, 0)].re,
            rho[(1, 1)].re,
            rho[(2, 2)].re,
            rho[(3, 3)].re,
        ]
    }

    #[test]
    fn initial_state_is_ground() {
        let params = MsParams::ideal(22.0);
        let state = ms_evolve_qubits(&params, 0.0).unwrap();
        let p = state.probabilities();
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_gate_reaches_maximally_entangled_state() {
        let params = MsParams::ideal(22.0);
        let t_gate = params.gate_time_us;
        let state = ms_evolve_qubits(&params, t_gate).unwrap();
        let p = state.probabilities();
        assert!(
            p[0] + p[3] > 1.0 - 1e-6,
            "P00 + P11 = {} at gate close",
            p[0] + p[3]
        );
        let (fid, chi) = bell_fidelity(&state).unwrap();
        assert!(fid > 1.0 - 1e-6, "bell fidelity {fid}");
        // The produced phase is chi = pi/2, i.e. (|00> + i|11>)/sqrt(2).
        assert!((chi - PI / 2.0).abs() < 1e-4, "chi = {chi}");
    }

    #[test]
    fn full_state_traces_down_to_qubit_state() {
        let mut params = MsParams::ideal(25.0);
        params.nbar_oop = 0.1;
        params.n_max = 12;
        let t = 0.6 * params.gate_time_us;
        let full = ms_evolve(&params, t).unwrap();
        assert_eq!(full.dims(), &[2, 2, 13]);
        assert!((full.rho().trace().re - 1.0).abs() < 1e-8);
        full.check_positive().unwrap();
        let reduced = full.trace_out_last().unwrap();
        let direct = ms_evolve_qubits(&params, t).unwrap();
        assert!(reduced.rho().max_abs_diff(direct.rho()) < 1e-12);
    }

    #[test]
    fn integrator_matches_closed_form_midway() {
        let mut params = MsParams::ideal(22.0);
        params.nbar_oop = 0.04;
        params.n_max = 15;
        for frac in [0.25, 0.5, 0.8, 1.0] {
            let t = frac * params.gate_time_us;
            let state = ms_evolve_qubits(&params, t).unwrap();
            let oracle = closed_form_qubit_state(&params, t);
            let diff = state.rho().max_abs_diff(&oracle);
            assert!(
                diff < 1e-6,
                "t = {t}: integrator vs closed form differs by {diff}"
            );
        }
    }

    #[test]
    fn experiment_defaults_populations_at_gate_end() {
        let params = MsParams::experiment_defaults();
        let state = ms_evolve_qubits(&params, params.gate_time_us).unwrap();
        let p = state.probabilities();
        assert!(p[0] + p[3] >= 0.98, "P00+P11 = {}", p[0] + p[3]);
    }

    #[test]
    fn trace_is_preserved_along_evolution() {
        let mut params = MsParams::ideal(22.0);
        params.nbar_oop = 0.1;
        params.n_max = 12;
        let times: Vec<f64> = (0..=40)
            .map(|i| i as f64 * params.gate_time_us / 40.0)
            .collect();
        let trace = evolution_trace(&params, &times).unwrap();
        assert!(trace.normalization_defect() < 1e-6);
    }

    #[test]
    fn closed_loop_population_symmetry() {
        // Over the double loop [0, 2/delta] the ideal populations at t and
        // 2/delta - t coincide up to the exchange P00 <-> P11: the geometric
        // phase obeys 4 theta(2T - t) = pi - 4 theta(t) at the entangling
        // strength, which flips the sign of its cosine, while P01 and P10
        // depend only on |alpha|^2 and are exactly symmetric.
        let params = MsParams::ideal(22.0);
        let t_loop = params.gate_time_us;
        for frac in [0.15, 0.4, 0.75] {
            let t = frac * t_loop;
            let a = ms_evolve_qubits(&params, t).unwrap();
            let b = ms_evolve_qubits(&params, 2.0 * t_loop - t).unwrap();
            let pa = populations(a.rho());
            let pb = populations(b.rho());
            assert!((pa[0] - pb[3]).abs() < 1e-6, "P00(t) vs P11(2T-t)");
            assert!((pa[3] - pb[0]).abs() < 1e-6, "P11(t) vs P00(2T-t)");
            assert!((pa[1] - pb[1]).abs() < 1e-6, "P01 symmetric");
            assert!((pa[2] - pb[2]).abs() < 1e-6, "P10 symmetric");
        }
    }

    #[test]
    fn truncation_convergence() {
        let mut params = MsParams::experiment_defaults();
        params.n_max = 15;
        let a = ms_evolve_qubits(&params, params.gate_time_us).unwrap();
        params.n_max = 20;
        let b = ms_evolve_qubits(&params, params.gate_time_us).unwrap();
        let pa = populations(a.rho());
        let pb = populations(b.rho());
        for k in 0..4 {
            assert!(
                (pa[k] - pb[k]).abs() < 1e-5,
                "population {k} moved with n_max"
            );
        }
    }

    #[test]
    fn step_halving_is_converged() {
        let params = MsParams::ideal(22.0);
        let defect = step_halving_defect(&params, params.gate_time_us).unwrap();
        assert!(defect < 1e-7, "halving defect {defect}");
    }

    #[test]
    fn validate_rejects_thin_truncation() {
        let mut params = MsParams::ideal(22.0);
        params.nbar_oop = 2.0;
        params.n_max = 8; // needs >= 15
        assert!(matches!(params.validate(), Err(Error::Truncation(_))));
    }

    #[test]
    fn parity_of_ideal_entangled_state() {
        let state = QuantumState::ideal_entangled();
        let phases: Vec<f64> = (0..24).map(|i| i as f64 * PI / 12.0).collect();
        let scan = parity_scan(&state, &phases).unwrap();
        assert!(
            (scan.contrast - 1.0).abs() < 1e-6,
            "contrast {}",
            scan.contrast
        );
        // parity(phi) = -sin(2 phi) for chi = pi/2
        for (phi, p) in scan.phases.iter().zip(&scan.parities) {
            assert!((p + (2.0 * phi).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn parity_of_maximally_mixed_state_is_flat() {
        let state = QuantumState::maximally_mixed(vec![2, 2]);
        let phases: Vec<f64> = (0..16).map(|i| i as f64 * PI / 8.0).collect();
        let scan = parity_scan(&state, &phases).unwrap();
        assert!(scan.contrast < 1e-12);
    }

    #[test]
    fn parity_contrast_scales_with_depolarization() {
        let p = 0.081;
        let state = crate::state::apply_depolarizing(&QuantumState::ideal_entangled(), p).unwrap();
        let phases: Vec<f64> = (0..24).map(|i| i as f64 * PI / 12.0).collect();
        let scan = parity_scan(&state, &phases).unwrap();
        assert!(
            (scan.contrast - (1.0 - p)).abs() < 1e-9,
            "contrast {}",
            scan.contrast
        );
    }

    #[test]
    fn parity_contrast_of_physical_states_is_bounded() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(404);
        let phases: Vec<f64> = (0..16).map(|i| i as f64 * PI / 8.0).collect();
        for _ in 0..50 {
            let g = ComplexMatrix::from_fn(4, 4, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let gg = g.mul(&g.dagger());
            let norm = gg.trace().re;
            let state = QuantumState::new(vec![2, 2], gg.scale(C64::new(1.0 / norm, 0.0))).unwrap();
            let scan = parity_scan(&state, &phases).unwrap();
            assert!(scan.contrast <= 1.0 + 1e-9, "contrast {}", scan.contrast);
            for p in &scan.parities {
                assert!(p.abs() <= 1.0 + 1e-12, "pointwise parity {p}");
            }
        }
    }

    #[test]
    fn leakage_beyond_cutoff_is_an_error() {
        // n_max = 5 passes the nbar adequacy check for a cold mode but the
        // driven displacement (|alpha| = 1/2 on the m = +-2 branches)
        // parks ~3e-3 of population in the top level mid-loop.
        let mut params = MsParams::ideal(22.0);
        params.n_max = 5;
        match ms_evolve_qubits(&params, params.gate_time_us / 2.0) {
            Err(Error::Truncation(msg)) => assert!(msg.contains("n_max"), "{msg}"),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn parity_fit_refused_below_eight_points() {
        let state = QuantumState::ideal_entangled();
        let phases: Vec<f64> = (0..7).map(|i| i as f64 * 0.5).collect();
        assert!(matches!(
            parity_scan(&state, &phases),
            Err(Error::FitRefused { min: 8, got: 7 })
        ));
    }

    #[test]
    fn fidelity_bound_values() {
        assert!((fidelity_bound(0.960, 0.919).unwrap() - 0.9395).abs() < 1e-12);
        assert!((fidelity_bound(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((fidelity_bound(0.5, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(fidelity_bound(1.2, 0.5).is_err());
        assert!(fidelity_bound(0.5, -0.1).is_err());
    }

    #[test]
    fn evolution_trace_csv_shape() {
        let params = MsParams::ideal(30.0);
        let times = [0.0, 5.0, 10.0];
        let trace = evolution_trace(&params, &times).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("time_us,p00,p01,p10,p11\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
