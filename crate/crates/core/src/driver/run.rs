//! Seeded end-to-end simulation runs and their on-disk artifacts.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{calibrate_phases, group_by_context};
use crate::error::{Error, Result};
use crate::measurement::{
    context_probabilities, repeatability_protocol, trial_from_probs, ContextId,
    RepeatabilityEstimate, RepeatabilityRecord, TrialRecord,
};
use crate::ms::{evolution_trace, ms_evolve_qubits, parity_scan};
use crate::observable::specs_with_offsets;
use crate::rng::{stream_rng, StreamDomain};
use crate::state::{apply_depolarizing, QuantumState};

use super::config::{ExperimentConfig, StatePrepConfig};
use super::report::{build_report, render_json, render_text, ContextualityReport};
use super::trialfile::{write_repeatability, write_trials};

/// Files written by a simulation run, relative to its output directory.
#[derive(Clone, Debug, Serialize)]
pub struct OutputFiles {
    pub trials: String,
    pub repeatability: String,
    pub report_text: String,
    pub report_json: String,
    pub manifest: String,
    pub evolution_csv: Option<String>,
    pub parity_csv: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CalibrationSummary {
    pub offset_yb: f64,
    pub offset_ba: f64,
    pub exact_c: f64,
    pub degenerate: bool,
}

/// Provenance record for one run; reruns with the same config hash and seed
/// produce byte-identical trial files.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub created_unix_secs: u64,
    pub trials_per_context: [u64; 4],
    pub repeatability_runs_per_observable: u64,
    pub calibration: Option<CalibrationSummary>,
    pub files: OutputFiles,
}

#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub records: Vec<TrialRecord>,
    pub repeatability_records: Vec<RepeatabilityRecord>,
    pub repeatability_estimates: Vec<RepeatabilityEstimate>,
    pub report: ContextualityReport,
    pub manifest: RunManifest,
}

/// Run the full pipeline: prepare the state, calibrate frames, generate all
/// four contexts' trials and the repeatability batches, persist everything,
/// and build the report.
pub fn run_simulation(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    config.validate()?;
    let seed = config
        .seed
        .ok_or_else(|| Error::InvalidConfig("simulation runs need a master seed".into()))?;
    let mut specs = config.to_specs()?;
    let readout = config.readout_model()?;

    // state preparation (+ dynamics artifacts for gate-simulation runs)
    let (prepared, dynamics_artifacts) = match &config.state_prep {
        StatePrepConfig::Ideal => (QuantumState::ideal_entangled(), None),
        StatePrepConfig::Ms(params) => {
            let state = ms_evolve_qubits(params, params.gate_time_us)?;
            let n_points = 61;
            let times: Vec<f64> = (0..n_points)
                .map(|k| params.gate_time_us * k as f64 / (n_points - 1) as f64)
                .collect();
            let trace = evolution_trace(params, &times)?;
            (state, Some(trace))
        }
    };
    let state = apply_depolarizing(&prepared, config.noise.depolarization)?;

    let calibration = if config.calibrate_phases {
        let cal = calibrate_phases(&state, &specs)?;
        specs = specs_with_offsets(&specs, cal.offset_yb, cal.offset_ba);
        Some(CalibrationSummary {
            offset_yb: cal.offset_yb,
            offset_ba: cal.offset_ba,
            exact_c: cal.c_value,
            degenerate: cal.degenerate,
        })
    } else {
        None
    };

    // parity-scan artifact of the prepared (noisy) state
    let parity_artifact = if matches!(config.state_prep, StatePrepConfig::Ms(_)) {
        let phases: Vec<f64> = (0..config.parity_scan_points.max(8))
            .map(|k| k as f64 * std::f64::consts::TAU / config.parity_scan_points.max(8) as f64)
            .collect();
        Some(parity_scan(&state, &phases)?)
    } else {
        None
    };

    // per-trial context order: a seeded shuffle of the balanced multiset
    let n = config.trials_per_setting;
    let mut slots: Vec<ContextId> = ContextId::all()
        .into_iter()
        .flat_map(|c| std::iter::repeat_n(c, n as usize))
        .collect();
    slots.shuffle(&mut stream_rng(seed, StreamDomain::ContextOrder));
    let mut per_context_counter = [0u64; 4];
    let assignments: Vec<(ContextId, u64)> = slots
        .into_iter()
        .map(|ctx| {
            let k = per_context_counter[ctx.index()];
            per_context_counter[ctx.index()] += 1;
            (ctx, k)
        })
        .collect();

    // exact per-context outcome distributions, then embarrassingly
    // parallel sampling on counter-derived streams
    let mut probs = [[0.0f64; 4]; 4];
    for ctx in ContextId::all() {
        probs[ctx.index()] = context_probabilities(&state, ctx, &specs)?;
    }
    let records: Vec<TrialRecord> = assignments
        .par_iter()
        .map(|&(ctx, trial_index)| {
            let domain = StreamDomain::Trial {
                context: ctx.index() as u8,
                trial_index,
            };
            let mut rng = stream_rng(seed, domain);
            trial_from_probs(
                &probs[ctx.index()],
                ctx,
                &specs,
                &readout,
                &mut rng,
                trial_index,
                domain.stream_id(),
            )
        })
        .collect();

    // repeatability batches
    let mut repeatability_estimates = Vec::with_capacity(4);
    let mut repeatability_records = Vec::new();
    for spec in &specs {
        let (est, mut recs) =
            repeatability_protocol(spec, &state, &readout, config.repeatability_runs, seed)?;
        repeatability_estimates.push(est);
        repeatability_records.append(&mut recs);
    }

    let batches = group_by_context(&records);
    let report = build_report(&batches, Some(&repeatability_estimates), config)?;

    // persistence
    std::fs::create_dir_all(out_dir)?;
    let files = OutputFiles {
        trials: "trials.txt".into(),
        repeatability: "repeatability.txt".into(),
        report_text: "report.txt".into(),
        report_json: "report.json".into(),
        manifest: "manifest.json".into(),
        evolution_csv: dynamics_artifacts
            .as_ref()
            .map(|_| "evolution.csv".to_string()),
        parity_csv: parity_artifact.as_ref().map(|_| "parity.csv".to_string()),
    };
    write_trials(&out_dir.join(&files.trials), &records)?;
    write_repeatability(&out_dir.join(&files.repeatability), &repeatability_records)?;
    if let (Some(trace), Some(name)) = (&dynamics_artifacts, &files.evolution_csv) {
        std::fs::write(out_dir.join(name), trace.to_csv())?;
    }
    if let (Some(scan), Some(name)) = (&parity_artifact, &files.parity_csv) {
        std::fs::write(out_dir.join(name), scan.to_csv())?;
    }
    std::fs::write(out_dir.join(&files.report_text), render_text(&report))?;
    std::fs::write(
        out_dir.join(&files.report_json),
        serde_json::to_string_pretty(&render_json(&report)).expect("json renders") + "\n",
    )?;

    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.config_hash(),
        master_seed: seed,
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        trials_per_context: per_context_counter,
        repeatability_runs_per_observable: config.repeatability_runs,
        calibration,
        files: files.clone(),
    };
    std::fs::write(
        out_dir.join(&files.manifest),
        serde_json::to_string_pretty(&manifest).expect("manifest renders") + "\n",
    )?;

    Ok(RunOutput {
        out_dir: out_dir.to_path_buf(),
        records,
        repeatability_records,
        repeatability_estimates,
        report,
        manifest,
    })
}

/// Reference classical model for null tests: each trial draws one of the 16
/// deterministic outcome assignments (o0, o1, o2, o3) from fixed weights and
/// answers every context from that assignment. Any such model satisfies
/// C <= 2 exactly.
pub fn generate_noncontextual_trials(
    master_seed: u64,
    trials_per_context: u64,
    weights: &[f64; 16],
) -> Vec<TrialRecord> {
    let total: f64 = weights.iter().sum();
    let mut records = Vec::with_capacity(4 * trials_per_context as usize);
    for ctx in ContextId::all() {
        let (i, j) = ctx.pair();
        for trial_index in 0..trials_per_context {
            let domain = StreamDomain::Trial {
                context: ctx.index() as u8,
                trial_index,
            };
            let mut rng = stream_rng(master_seed, domain);
            let mut u = rng.random::<f64>() * total;
            let mut assignment = 15usize;
            for (a, &w) in weights.iter().enumerate() {
                if u < w {
                    assignment = a;
                    break;
                }
                u -= w;
            }
            let outcome = |obs: usize| -> i8 {
                if assignment >> (3 - obs) & 1 == 0 {
                    1
                } else {
                    -1
                }
            };
            records.push(TrialRecord {
                setting: ctx,
                outcome_i: outcome(i),
                outcome_j: outcome(j),
                trial_index,
                rng_stream_id: domain.stream_id(),
            });
        }
    }
    records
}
