//! Correlators, the CHSH-form statistic C = E01 + E12 + E23 - E30, the
//! three epsilon-corrected noncontextual bounds, violation significance,
//! and calibration of the per-ion measurement frames.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measurement::{ContextId, ReadoutModel, TrialRecord};
use crate::observable::{observable_from_phase, specs_with_offsets, Ion, ObservableSpec};
use crate::rng::{stream_rng, StreamDomain};
use crate::state::{expectation, QuantumState};

/// Worst-case algebraic maximum of C, reached by fully conspiratorial
/// assignments.
pub const ALGEBRAIC_MAX_C: f64 = 4.0;

/// Coefficient of the sequential-disturbance bound epsilon = k (1 - R).
/// This linear form is a documented approximation; the coefficient is the
/// value that maps a mean repeatability of 0.984 onto epsilon = 0.128.
pub const SEQUENTIAL_EPSILON_COEFFICIENT: f64 = 8.0;

/// Quantum ceiling 2 sqrt(2) of the C statistic.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Mean, standard error of the mean, and count for one correlator or
/// marginal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatorEstimate {
    pub mean: f64,
    pub sem: f64,
    pub n: u64,
}

/// Streaming mean/variance accumulator (Welford) with an associative merge
/// (Chan), so batches can be sharded and combined in any order.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let total = n1 + n2;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> CorrelatorEstimate {
        CorrelatorEstimate {
            mean: self.mean,
            sem: (self.sample_variance() / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Mean product of the two +-1 outcomes of one context, with its SEM from
/// the sample variance.
pub fn correlator(outcomes: &[(i8, i8)]) -> Result<CorrelatorEstimate> {
    if outcomes.len() < 2 {
        return Err(Error::EmptyInput("correlator needs at least two trials"));
    }
    let mut acc = MomentAccumulator::default();
    for &(a, b) in outcomes {
        acc.push((a * b) as f64);
    }
    Ok(acc.estimate())
}

fn marginal(outcomes: &[(i8, i8)], pick_first: bool) -> Result<CorrelatorEstimate> {
    if outcomes.len() < 2 {
        return Err(Error::EmptyInput("marginal needs at least two trials"));
    }
    let mut acc = MomentAccumulator::default();
    for &(a, b) in outcomes {
        acc.push(if pick_first { a as f64 } else { b as f64 });
    }
    Ok(acc.estimate())
}

/// Correlator plus both single-observable marginals of one context.
#[derive(Clone, Copy, Debug)]
pub struct ContextStats {
    pub context: ContextId,
    pub correlator: CorrelatorEstimate,
    /// <O_i>^(j): marginal of the context's first observable.
    pub marginal_first: CorrelatorEstimate,
    /// <O_j>^(i): marginal of the context's second observable.
    pub marginal_second: CorrelatorEstimate,
}

impl ContextStats {
    pub fn from_outcomes(context: ContextId, outcomes: &[(i8, i8)]) -> Result<Self> {
        Ok(Self {
            context,
            correlator: correlator(outcomes)?,
            marginal_first: marginal(outcomes, true)?,
            marginal_second: marginal(outcomes, false)?,
        })
    }
}

/// All eight ordered marginals <O_i>^(j) over the four contexts.
#[derive(Clone, Copy, Debug)]
pub struct MarginalTable {
    /// <O_i> measured jointly with the next observable i+1 (context {i, i+1}).
    pub with_next: [CorrelatorEstimate; 4],
    /// <O_i> measured jointly with the previous observable i-1 (context {i-1, i}).
    pub with_prev: [CorrelatorEstimate; 4],
}

impl MarginalTable {
    /// Assemble the table from the four per-context statistics.
    pub fn from_contexts(stats: &[ContextStats; 4]) -> Self {
        let mut with_next = [CorrelatorEstimate {
            mean: 0.0,
            sem: 0.0,
            n: 0,
        }; 4];
        let mut with_prev = with_next;
        for s in stats {
            let (i, j) = s.context.pair();
            with_next[i] = s.marginal_first;
            with_prev[j] = s.marginal_second;
        }
        Self {
            with_next,
            with_prev,
        }
    }
}

/// Signed sum of the four context correlators with quadrature-combined SEM.
pub fn chsh_statistic(estimates: &[Option<CorrelatorEstimate>; 4]) -> Result<(f64, f64)> {
    let mut c = 0.0;
    let mut var = 0.0;
    for ctx in ContextId::all() {
        let est = estimates[ctx.index()].ok_or_else(|| {
            let (i, j) = ctx.pair();
            Error::MissingContext { i, j }
        })?;
        c += ctx.chsh_sign() * est.mean;
        var += est.sem * est.sem;
    }
    Ok((c, var.sqrt()))
}

/// Bound correction for models that are noncontextual only on a fraction f
/// of trials and algebraically maximal on the rest.
pub fn epsilon_fraction(f: f64) -> Result<f64> {
    epsilon_fraction_with(f, ALGEBRAIC_MAX_C)
}

pub fn epsilon_fraction_with(f: f64, algebraic_max: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::OutOfRange(format!("fraction f = {f}")));
    }
    Ok((1.0 - f) * (algebraic_max - 2.0))
}

/// Bound correction for maximally noncontextual models; the sum of the four
/// absolute marginal differences, with linearized SEM propagation. When a
/// difference sits within one SEM of zero its contribution is still
/// included (conservative).
pub fn epsilon_mnc(table: &MarginalTable) -> Result<(f64, f64)> {
    for est in table.with_next.iter().chain(table.with_prev.iter()) {
        if est.n == 0 {
            return Err(Error::EmptyInput("marginal table is incomplete"));
        }
    }
    let mut eps = 0.0;
    let mut var = 0.0;
    for i in 0..4 {
        eps += (table.with_next[i].mean - table.with_prev[i].mean).abs();
        var += table.with_next[i].sem.powi(2) + table.with_prev[i].sem.powi(2);
    }
    Ok((eps, var.sqrt()))
}

/// Bound correction for sequential-disturbance models, linear in the
/// repeatability deficit.
pub fn epsilon_sequential(mean_repeatability: f64) -> Result<f64> {
    epsilon_sequential_with(mean_repeatability, SEQUENTIAL_EPSILON_COEFFICIENT)
}

pub fn epsilon_sequential_with(mean_repeatability: f64, coefficient: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mean_repeatability) {
        return Err(Error::OutOfRange(format!(
            "mean repeatability {mean_repeatability}"
        )));
    }
    Ok(coefficient * (1.0 - mean_repeatability))
}

/// Standard deviations by which C exceeds the corrected bound 2 + epsilon.
pub fn violation_significance(c: f64, sem_c: f64, epsilon: f64) -> Result<f64> {
    if sem_c < 0.0 {
        return Err(Error::OutOfRange(format!("sem_C = {sem_c}")));
    }
    let excess = c - 2.0 - epsilon;
    if sem_c == 0.0 {
        if excess.abs() < 1e-12 {
            return Ok(0.0);
        }
        return Err(Error::ZeroSem);
    }
    Ok(excess / sem_c)
}

fn observable_on_pair(spec: &ObservableSpec) -> ComplexMatrixPair {
    ComplexMatrixPair {
        op: observable_from_phase(spec),
        ion: spec.ion,
    }
}

struct ComplexMatrixPair {
    op: crate::linalg::ComplexMatrix,
    ion: Ion,
}

/// Exact quantum correlator <O_i O_j> of one context (signs included).
pub fn exact_correlator(
    state: &QuantumState,
    specs: &[ObservableSpec; 4],
    context: ContextId,
) -> Result<f64> {
    let (i, j) = context.pair();
    let a = observable_on_pair(&specs[i]);
    let b = observable_on_pair(&specs[j]);
    let (yb, ba) = if a.ion == Ion::Yb {
        (&a.op, &b.op)
    } else {
        (&b.op, &a.op)
    };
    expectation(state, &yb.kron(ba))
}

/// Exact C from quantum expectations, no sampling.
pub fn exact_chsh(state: &QuantumState, specs: &[ObservableSpec; 4]) -> Result<f64> {
    let mut c = 0.0;
    for ctx in ContextId::all() {
        c += ctx.chsh_sign() * exact_correlator(state, specs, ctx)?;
    }
    Ok(c)
}

/// Exact recorded-statistics prediction for one context after the classical
/// readout flips: the correlator and both marginals that an infinite-trial
/// experiment would report.
pub fn exact_recorded_context(
    state: &QuantumState,
    specs: &[ObservableSpec; 4],
    readout: &ReadoutModel,
    context: ContextId,
) -> Result<(f64, f64, f64)> {
    let (i, j) = context.pair();
    // z-level (sign-free, dark = +1) expectations
    let unsigned = |spec: &ObservableSpec| {
        let mut s = *spec;
        s.convention_sign = 1;
        observable_on_pair(&s)
    };
    let a = unsigned(&specs[i]);
    let b = unsigned(&specs[j]);
    let (yb_op, ba_op) = if a.ion == Ion::Yb {
        (&a.op, &b.op)
    } else {
        (&b.op, &a.op)
    };
    let id = crate::linalg::ComplexMatrix::identity(2);
    let e_z = expectation(state, &yb_op.kron(ba_op))?;
    let m_yb = expectation(state, &yb_op.kron(&id))?;
    let m_ba = expectation(state, &id.kron(ba_op))?;

    let (k_yb, d_yb) = (readout.yb.shrinkage(), readout.yb.offset());
    let (k_ba, d_ba) = (readout.ba.shrinkage(), readout.ba.offset());
    let enc = if readout.dark_is_plus { 1.0 } else { -1.0 };

    let e_rec = k_yb * k_ba * e_z - k_yb * d_ba * m_yb - d_yb * k_ba * m_ba + d_yb * d_ba;
    let m_rec = |spec: &ObservableSpec| -> f64 {
        let (k, d, m) = match spec.ion {
            Ion::Yb => (k_yb, d_yb, m_yb),
            Ion::Ba => (k_ba, d_ba, m_ba),
        };
        spec.convention_sign as f64 * enc * (k * m - d)
    };
    let sign_ij = (specs[i].convention_sign * specs[j].convention_sign) as f64;
    Ok((sign_ij * e_rec, m_rec(&specs[i]), m_rec(&specs[j])))
}

/// Exact C that the noisy readout would report for this state.
pub fn exact_recorded_chsh(
    state: &QuantumState,
    specs: &[ObservableSpec; 4],
    readout: &ReadoutModel,
) -> Result<f64> {
    let mut c = 0.0;
    for ctx in ContextId::all() {
        let (e, _, _) = exact_recorded_context(state, specs, readout, ctx)?;
        c += ctx.chsh_sign() * e;
    }
    Ok(c)
}

/// Depolarization p such that the exact recorded C equals `target`; the
/// recorded C is affine in p.
pub fn depolarization_for_target_c(
    state: &QuantumState,
    specs: &[ObservableSpec; 4],
    readout: &ReadoutModel,
    target: f64,
) -> Result<f64> {
    let c0 = exact_recorded_chsh(state, specs, readout)?;
    let mixed = QuantumState::maximally_mixed(state.dims().to_vec());
    let c1 = exact_recorded_chsh(&mixed, specs, readout)?;
    if (c0 - c1).abs() < 1e-12 {
        return Err(Error::OutOfRange(
            "C does not depend on depolarization".into(),
        ));
    }
    let p = (c0 - target) / (c0 - c1);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!(
            "target C = {target} needs depolarization {p:.4} outside [0,1]"
        )));
    }
    Ok(p)
}

/// Result of the two-parameter frame search.
#[derive(Clone, Copy, Debug)]
pub struct PhaseCalibration {
    pub offset_yb: f64,
    pub offset_ba: f64,
    /// Exact C at the returned offsets.
    pub c_value: f64,
    /// Set when C is constant over the whole grid (e.g. a maximally mixed
    /// state); offsets are then (0, 0).
    pub degenerate: bool,
}

/// Find per-ion frame offsets maximizing the exact C. Coarse 64x64 grid
/// over [0, 2pi)^2 followed by a shrinking local pattern search; the
/// objective is a smooth trigonometric polynomial, so the refined optimum
/// is global to well below 1e-6 in C.
pub fn calibrate_phases(
    state: &QuantumState,
    base: &[ObservableSpec; 4],
) -> Result<PhaseCalibration> {
    let objective =
        |u: f64, v: f64| -> Result<f64> { exact_chsh(state, &specs_with_offsets(base, u, v)) };

    const GRID: usize = 64;
    let step = TAU / GRID as f64;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    let mut lowest = f64::INFINITY;
    for iu in 0..GRID {
        for iv in 0..GRID {
            let u = iu as f64 * step;
            let v = iv as f64 * step;
            let c = objective(u, v)?;
            if c > best.2 {
                best = (u, v, c);
            }
            lowest = lowest.min(c);
        }
    }
    if best.2 - lowest < 1e-9 {
        return Ok(PhaseCalibration {
            offset_yb: 0.0,
            offset_ba: 0.0,
            c_value: objective(0.0, 0.0)?,
            degenerate: true,
        });
    }

    let (mut u, mut v, mut c) = best;
    let mut radius = step;
    let mut budget = 20_000usize;
    while radius > 1e-9 && budget > 0 {
        budget -= 1;
        let mut improved = false;
        for (du, dv) in [
            (radius, 0.0),
            (-radius, 0.0),
            (0.0, radius),
            (0.0, -radius),
            (radius, radius),
            (radius, -radius),
            (-radius, radius),
            (-radius, -radius),
        ] {
            let cand = objective(u + du, v + dv)?;
            if cand > c {
                u += du;
                v += dv;
                c = cand;
                improved = true;
            }
        }
        if !improved {
            radius *= 0.5;
        }
    }
    Ok(PhaseCalibration {
        offset_yb: u.rem_euclid(TAU),
        offset_ba: v.rem_euclid(TAU),
        c_value: c,
        degenerate: false,
    })
}

/// Bootstrap SEM of epsilon_mnc: each resample redraws every context's
/// outcome pairs from their empirical distribution and recomputes the sum
/// of absolute marginal differences.
pub fn bootstrap_epsilon_mnc_sem(
    batches: &[Vec<(i8, i8)>; 4],
    resamples: u64,
    master_seed: u64,
) -> Result<f64> {
    if resamples < 2 {
        return Err(Error::EmptyInput("bootstrap needs at least two resamples"));
    }
    // Empirical cell distributions over (+1,+1), (+1,-1), (-1,+1), (-1,-1).
    let mut cells = [[0.0f64; 4]; 4];
    let mut counts = [0usize; 4];
    for (ctx, batch) in batches.iter().enumerate() {
        if batch.len() < 2 {
            let (i, j) = ContextId::new(ctx)?.pair();
            return Err(Error::MissingContext { i, j });
        }
        counts[ctx] = batch.len();
        for &(a, b) in batch {
            let idx = ((a < 0) as usize) * 2 + ((b < 0) as usize);
            cells[ctx][idx] += 1.0;
        }
        for c in &mut cells[ctx] {
            *c /= batch.len() as f64;
        }
    }
    const OUTCOMES: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
    let mut acc = MomentAccumulator::default();
    for b in 0..resamples {
        let mut rng = stream_rng(master_seed, StreamDomain::Bootstrap { resample_index: b });
        let mut stats: Vec<ContextStats> = Vec::with_capacity(4);
        for ctx in ContextId::all() {
            let probs = &cells[ctx.index()];
            let mut fake = Vec::with_capacity(counts[ctx.index()]);
            for _ in 0..counts[ctx.index()] {
                let mut u = rng.random::<f64>();
                let mut pick = 3;
                for (k, &p) in probs.iter().enumerate() {
                    if u < p {
                        pick = k;
                        break;
                    }
                    u -= p;
                }
                fake.push(OUTCOMES[pick]);
            }
            stats.push(ContextStats::from_outcomes(ctx, &fake)?);
        }
        let table = MarginalTable::from_contexts(&[stats[0], stats[1], stats[2], stats[3]]);
        acc.push(epsilon_mnc(&table)?.0);
    }
    Ok(acc.sample_variance().sqrt())
}

/// Outcome pairs of the four contexts, in context order.
pub type ContextBatches = [Vec<(i8, i8)>; 4];

/// Group raw trial records into per-context outcome batches, preserving
/// input order.
pub fn group_by_context(records: &[TrialRecord]) -> ContextBatches {
    let mut batches = ContextBatches::default();
    for rec in records {
        batches[rec.setting.index()].push((rec.outcome_i, rec.outcome_j));
    }
    batches
}
