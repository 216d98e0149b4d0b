//! Measurement layer: basis rotations, noisy fluorescence readout, trial
//! records, and the double-measurement repeatability protocol.
//!
//! Readout errors are classical bit flips applied to the recorded outcome,
//! independent per ion; the post-measurement state is the Lueders projection
//! of the TRUE outcome (a misread does not re-prepare the ion).

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::observable::{rotation, Ion, ObservableSpec};
use crate::rng::{stream_rng, StreamDomain};
use crate::state::QuantumState;

/// Classical fluorescence misidentification probabilities for one ion.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// P(report bright | dark), the dark-state detection infidelity.
    pub p_report1_given0: f64,
    /// P(report dark | bright).
    pub p_report0_given1: f64,
}

impl ConfusionMatrix {
    pub fn new(p_report1_given0: f64, p_report0_given1: f64) -> Result<Self> {
        for p in [p_report1_given0, p_report0_given1] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange(format!("confusion probability {p}")));
            }
        }
        Ok(Self {
            p_report1_given0,
            p_report0_given1,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            p_report1_given0: 0.0,
            p_report0_given1: 0.0,
        }
    }

    /// Yb fluorescence errors: 0.96% dark->bright, 2.25% bright->dark.
    pub fn yb_default() -> Self {
        Self {
            p_report1_given0: 0.0096,
            p_report0_given1: 0.0225,
        }
    }

    /// Ba fluorescence errors: 2.10% dark->bright, 0.01% bright->dark.
    pub fn ba_default() -> Self {
        Self {
            p_report1_given0: 0.0210,
            p_report0_given1: 0.0001,
        }
    }

    /// Correlator shrinkage factor 1 - e0 - e1 for this ion.
    pub fn shrinkage(&self) -> f64 {
        1.0 - self.p_report1_given0 - self.p_report0_given1
    }

    /// Marginal offset e0 - e1 for this ion (in encoded units with dark
    /// mapped to +1).
    pub fn offset(&self) -> f64 {
        self.p_report1_given0 - self.p_report0_given1
    }

    fn flip(&self, true_z: u8, u: f64) -> u8 {
        match true_z {
            0 => u8::from(u < self.p_report1_given0),
            _ => 1 - u8::from(u < self.p_report0_given1),
        }
    }
}

/// Per-ion confusion matrices plus the outcome-sign convention.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub yb: ConfusionMatrix,
    pub ba: ConfusionMatrix,
    /// Encoding of fluorescence results as +-1; with `true`, dark (|0>)
    /// maps to +1 and bright (|1>) to -1.
    pub dark_is_plus: bool,
}

impl ReadoutModel {
    pub fn noiseless() -> Self {
        Self {
            yb: ConfusionMatrix::noiseless(),
            ba: ConfusionMatrix::noiseless(),
            dark_is_plus: true,
        }
    }

    pub fn experiment_defaults() -> Self {
        Self {
            yb: ConfusionMatrix::yb_default(),
            ba: ConfusionMatrix::ba_default(),
            dark_is_plus: true,
        }
    }

    pub fn for_ion(&self, ion: Ion) -> &ConfusionMatrix {
        match ion {
            Ion::Yb => &self.yb,
            Ion::Ba => &self.ba,
        }
    }

    pub fn encode(&self, z: u8) -> i8 {
        let plus_is_dark = if self.dark_is_plus { 0 } else { 1 };
        if z == plus_is_dark {
            1
        } else {
            -1
        }
    }
}

/// One of the four measured contexts, the edges of the compatibility
/// four-cycle: {0,1}, {1,2}, {2,3}, {3,0}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextId(u8);

impl ContextId {
    pub const COUNT: usize = 4;

    pub fn new(index: usize) -> Result<Self> {
        if index < 4 {
            Ok(Self(index as u8))
        } else {
            Err(Error::OutOfRange(format!("context index {index}")))
        }
    }

    pub fn all() -> [ContextId; 4] {
        [ContextId(0), ContextId(1), ContextId(2), ContextId(3)]
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Ordered observable pair (i, j) of this context.
    pub fn pair(self) -> (usize, usize) {
        let i = self.0 as usize;
        (i, (i + 1) % 4)
    }

    /// Sign of this context's correlator in the C statistic
    /// E01 + E12 + E23 - E30.
    pub fn chsh_sign(self) -> f64 {
        if self.0 == 3 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn from_pair(i: usize, j: usize) -> Result<Self> {
        for ctx in Self::all() {
            if ctx.pair() == (i, j) {
                return Ok(ctx);
            }
        }
        Err(Error::MissingContext { i, j })
    }
}

impl std::fmt::Display for ContextId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (i, j) = self.pair();
        write!(f, "{i},{j}")
    }
}

/// One experimental shot: the measured context, the two +-1 outcomes in the
/// context's (i, j) order, and bookkeeping for reproducibility.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub setting: ContextId,
    pub outcome_i: i8,
    pub outcome_j: i8,
    pub trial_index: u64,
    pub rng_stream_id: u64,
}

/// Embed a single-qubit operator into the two-qubit space at the ion's slot.
pub fn embed_on_ion(op: &ComplexMatrix, ion: Ion) -> ComplexMatrix {
    let id = ComplexMatrix::identity(2);
    match ion {
        Ion::Yb => op.kron(&id),
        Ion::Ba => id.kron(op),
    }
}

/// z-basis outcome probabilities after rotating each ion into the
/// measurement basis of its observable.
pub fn context_probabilities(
    state: &QuantumState,
    setting: ContextId,
    specs: &[ObservableSpec; 4],
) -> Result<[f64; 4]> {
    if state.dims() != [2, 2] {
        return Err(Error::DimensionMismatch(format!(
            "trial measurement needs a two-qubit state, got dims {:?}",
            state.dims()
        )));
    }
    let (i, j) = setting.pair();
    let (yb_spec, ba_spec) = if specs[i].ion == Ion::Yb {
        (&specs[i], &specs[j])
    } else {
        (&specs[j], &specs[i])
    };
    let u = yb_spec.rotation_to_z().kron(&ba_spec.rotation_to_z());
    let rotated = state.evolve(&u)?;
    let p = rotated.probabilities();
    Ok([p[0], p[1], p[2], p[3]])
}

/// Sample recorded fluorescence results (z_yb, z_ba) from the rotated-state
/// probabilities: Born rule for the true outcomes, then one independent
/// confusion flip per ion. Consumes exactly three uniform draws.
pub fn sample_readout(probs: &[f64; 4], readout: &ReadoutModel, rng: &mut impl Rng) -> (u8, u8) {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut k = 3;
    for (idx, &p) in probs.iter().enumerate() {
        if u < p {
            k = idx;
            break;
        }
        u -= p;
    }
    let true_yb = (k >> 1) as u8;
    let true_ba = (k & 1) as u8;
    let recorded_yb = readout.yb.flip(true_yb, rng.random());
    let recorded_ba = readout.ba.flip(true_ba, rng.random());
    (recorded_yb, recorded_ba)
}

/// Measure one trial of a context: rotate per the observable specs, read
/// both ions out through their confusion matrices, and record +-1 outcomes
/// (never inconclusive).
pub fn measure_trial(
    state: &QuantumState,
    setting: ContextId,
    specs: &[ObservableSpec; 4],
    readout: &ReadoutModel,
    rng: &mut impl Rng,
    trial_index: u64,
    rng_stream_id: u64,
) -> Result<TrialRecord> {
    let probs = context_probabilities(state, setting, specs)?;
    Ok(trial_from_probs(
        &probs,
        setting,
        specs,
        readout,
        rng,
        trial_index,
        rng_stream_id,
    ))
}

/// Sampling stage of [`measure_trial`], reusable with precomputed
/// probabilities; both paths consume the generator identically.
pub fn trial_from_probs(
    probs: &[f64; 4],
    setting: ContextId,
    specs: &[ObservableSpec; 4],
    readout: &ReadoutModel,
    rng: &mut impl Rng,
    trial_index: u64,
    rng_stream_id: u64,
) -> TrialRecord {
    let (z_yb, z_ba) = sample_readout(probs, readout, rng);
    let (i, j) = setting.pair();
    let outcome_for = |spec: &ObservableSpec| -> i8 {
        let z = match spec.ion {
            Ion::Yb => z_yb,
            Ion::Ba => z_ba,
        };
        spec.convention_sign * readout.encode(z)
    };
    TrialRecord {
        setting,
        outcome_i: outcome_for(&specs[i]),
        outcome_j: outcome_for(&specs[j]),
        trial_index,
        rng_stream_id,
    }
}

/// Lueders-rule projection onto the +-1 eigenspace of a two-outcome
/// observable, renormalized.
pub fn collapse_after_measurement(
    state: &QuantumState,
    outcome: i8,
    observable: &ComplexMatrix,
) -> Result<QuantumState> {
    if outcome != 1 && outcome != -1 {
        return Err(Error::OutOfRange(format!(
            "outcome must be +-1, got {outcome}"
        )));
    }
    if observable.rows() != state.dim() || observable.cols() != state.dim() {
        return Err(Error::DimensionMismatch(
            "observable and state dimensions differ".into(),
        ));
    }
    let d = state.dim();
    let half = num_complex::Complex64::new(0.5 * outcome as f64, 0.0);
    let projector = ComplexMatrix::identity(d)
        .scale(num_complex::Complex64::new(0.5, 0.0))
        .add(&observable.scale(half));
    let projected = projector.mul(state.rho()).mul(&projector);
    let weight = projected.trace().re;
    if weight < 1e-12 {
        return Err(Error::ZeroProbabilityBranch);
    }
    let rho = projected.scale(num_complex::Complex64::new(1.0 / weight, 0.0));
    QuantumState::new(state.dims().to_vec(), rho)
}

/// Post-selected double measurement of one observable (Fig.-style
/// repeatability sequence).
#[derive(Clone, Copy, Debug)]
pub struct RepeatabilityRecord {
    pub observable: usize,
    /// Whether this run tested the bright branch through the pi-rotation
    /// sandwich.
    pub bright_branch: bool,
    pub first_outcome: i8,
    pub second_outcome: i8,
    /// True when the first readout reported no fluorescence; only these
    /// runs enter R_i.
    pub post_selected: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct RepeatabilityEstimate {
    pub observable: usize,
    pub r: f64,
    pub sem: f64,
    pub retained: u64,
    pub total: u64,
}

/// One PM block: optional pi sandwich, fluorescence readout of the tested
/// ion (true-outcome collapse, recorded flip), optional pi back.
/// Returns (recorded_no_fluorescence, collapsed state).
fn projective_measurement(
    state: &QuantumState,
    ion: Ion,
    confusion: &ConfusionMatrix,
    bright_branch: bool,
    rng: &mut impl Rng,
) -> Result<(bool, QuantumState)> {
    let pi_pulse = embed_on_ion(&rotation(PI, 0.0), ion);
    let mut s = state.clone();
    if bright_branch {
        s = s.evolve(&pi_pulse)?;
    }
    let probs = s.probabilities();
    let p_dark: f64 = match ion {
        Ion::Yb => probs[0] + probs[1],
        Ion::Ba => probs[0] + probs[2],
    };
    let true_z: u8 = if rng.random::<f64>() < p_dark { 0 } else { 1 };
    let sigma_z = embed_on_ion(&ComplexMatrix::pauli_z(), ion);
    let pm_outcome = if true_z == 0 { 1 } else { -1 };
    s = collapse_after_measurement(&s, pm_outcome, &sigma_z)?;
    let recorded_z = confusion.flip(true_z, rng.random());
    if bright_branch {
        s = s.evolve(&pi_pulse)?;
    }
    Ok((recorded_z == 0, s))
}

fn repeatability_run(
    spec: &ObservableSpec,
    prep: &QuantumState,
    readout: &ReadoutModel,
    bright_branch: bool,
    rng: &mut impl Rng,
) -> Result<RepeatabilityRecord> {
    let confusion = readout.for_ion(spec.ion);
    let rot = embed_on_ion(&spec.rotation_to_z(), spec.ion);
    // (ii) rotate the measurement basis onto the observable
    let state = prep.evolve(&rot)?;
    // (iii) first projective measurement
    let (first_no_fluor, state) =
        projective_measurement(&state, spec.ion, confusion, bright_branch, rng)?;
    // (iv) rotate back, (v) rotate again
    let state = state.evolve(&rot.dagger())?.evolve(&rot)?;
    // (vi) second projective measurement
    let (second_no_fluor, _) =
        projective_measurement(&state, spec.ion, confusion, bright_branch, rng)?;

    // Map "no fluorescence" back through the sandwich to the observable
    // outcome: the dark branch certifies the dark eigenstate, the bright
    // branch certifies the bright one.
    let outcome_of = |no_fluor: bool| -> i8 {
        let effective_z = if bright_branch {
            u8::from(no_fluor)
        } else {
            u8::from(!no_fluor)
        };
        spec.convention_sign * readout.encode(effective_z)
    };
    Ok(RepeatabilityRecord {
        observable: spec.index,
        bright_branch,
        first_outcome: outcome_of(first_no_fluor),
        second_outcome: outcome_of(second_no_fluor),
        post_selected: first_no_fluor,
    })
}

/// Run the full repeatability protocol for one observable: `n_runs` runs
/// split evenly between the dark and bright branches, post-selected on the
/// first readout only.
pub fn repeatability_protocol(
    spec: &ObservableSpec,
    prep: &QuantumState,
    readout: &ReadoutModel,
    n_runs: u64,
    master_seed: u64,
) -> Result<(RepeatabilityEstimate, Vec<RepeatabilityRecord>)> {
    if n_runs == 0 {
        return Err(Error::EmptyInput("repeatability needs at least one run"));
    }
    let mut records = Vec::with_capacity(n_runs as usize);
    for run_index in 0..n_runs {
        let mut rng = stream_rng(
            master_seed,
            StreamDomain::Repeatability {
                observable: spec.index as u8,
                run_index,
            },
        );
        let bright_branch = run_index % 2 == 1;
        records.push(repeatability_run(
            spec,
            prep,
            readout,
            bright_branch,
            &mut rng,
        )?);
    }
    let estimate = estimate_repeatability(spec.index, &records)?;
    Ok((estimate, records))
}

/// R_i and its binomial SEM from a batch of records.
pub fn estimate_repeatability(
    observable: usize,
    records: &[RepeatabilityRecord],
) -> Result<RepeatabilityEstimate> {
    let retained: Vec<_> = records.iter().filter(|r| r.post_selected).collect();
    if retained.is_empty() {
        return Err(Error::AllRunsDiscarded);
    }
    let n = retained.len() as f64;
    let equal = retained
        .iter()
        .filter(|r| r.first_outcome == r.second_outcome)
        .count() as f64;
    let r = equal / n;
    let sem = (r * (1.0 - r) / n).sqrt();
    Ok(RepeatabilityEstimate {
        observable,
        r,
        sem,
        retained: retained.len() as u64,
        total: records.len() as u64,
    })
}
