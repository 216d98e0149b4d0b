//! Acceptance suite: one test per top-level criterion, each printing a
//! PASS/FAIL line with the measured values (run with `--nocapture` to see
//! them all).

use std::time::Instant;

use rayon::prelude::*;

use ionctx_core::analysis::{
    calibrate_phases, chsh_statistic, correlator, epsilon_fraction, epsilon_mnc,
    epsilon_sequential, exact_correlator, exact_recorded_context, group_by_context,
    violation_significance, CorrelatorEstimate, MomentAccumulator, TSIRELSON_BOUND,
};
use ionctx_core::crosstalk::{crosstalk_budget, IonOpticalParams};
use ionctx_core::driver::{
    build_report, generate_noncontextual_trials, run_simulation, ExperimentConfig,
};
use ionctx_core::measurement::{
    context_probabilities, repeatability_protocol, trial_from_probs, ConfusionMatrix, ContextId,
    ReadoutModel,
};
use ionctx_core::ms::{fidelity_bound, ms_evolve_qubits, parity_scan, MsParams};
use ionctx_core::observable::{default_specs, rotation, specs_with_offsets};
use ionctx_core::refdata;
use ionctx_core::rng::{stream_rng, StreamDomain};
use ionctx_core::state::{apply_depolarizing, QuantumState};

fn reference_batches() -> [Vec<(i8, i8)>; 4] {
    [
        refdata::synthesize_context_outcomes(&refdata::REFERENCE_CONTEXTS[0]),
        refdata::synthesize_context_outcomes(&refdata::REFERENCE_CONTEXTS[1]),
        refdata::synthesize_context_outcomes(&refdata::REFERENCE_CONTEXTS[2]),
        refdata::synthesize_context_outcomes(&refdata::REFERENCE_CONTEXTS[3]),
    ]
}

/// Golden pipeline: the synthesized reference dataset, written to a trial
/// file and ingested back, must reproduce C = 2.526 +- 0.016 through the
/// ordinary report path in under a second.
#[test]
fn acceptance_golden_reference_pipeline() {
    let start = Instant::now();
    let config = ExperimentConfig::reference_run();

    // synthesized counts -> 40 000-line trial file -> ingest -> report
    let mut records = Vec::with_capacity(40_000);
    for (ctx, batch) in ContextId::all().iter().zip(reference_batches()) {
        for (trial_index, (a, b)) in batch.into_iter().enumerate() {
            records.push(ionctx_core::measurement::TrialRecord {
                setting: *ctx,
                outcome_i: a,
                outcome_j: b,
                trial_index: trial_index as u64,
                rng_stream_id: 0,
            });
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reference_trials.txt");
    ionctx_core::driver::write_trials(&path, &records).unwrap();
    let (read_back, batches) = ionctx_core::driver::ingest(&path).unwrap();
    assert_eq!(read_back.len(), 40_000);
    assert!(batches.iter().all(|b| b.len() == 10_000));

    let report = build_report(&batches, None, &config).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let c_ok = (report.c_value - 2.5258).abs() <= 0.001;
    let sem_ok = (report.c_sem - 0.016).abs() <= 0.001;
    let time_ok = elapsed < 1.0;
    println!(
        "ACCEPTANCE golden-reference-pipeline: {} (C = {:.4}, sem = {:.4}, {:.3} s)",
        if c_ok && sem_ok && time_ok {
            "PASS"
        } else {
            "FAIL"
        },
        report.c_value,
        report.c_sem,
        elapsed
    );
    assert!(c_ok, "C = {} not within 0.001 of 2.5258", report.c_value);
    assert!(sem_ok, "sem_C = {} not within 0.001 of 0.016", report.c_sem);
    assert!(time_ok, "pipeline took {elapsed:.3} s");
}

/// The three epsilon models at their quoted operating points.
#[test]
fn acceptance_epsilon_triple() {
    let eps_f = epsilon_fraction(0.97).unwrap();
    let (eps_m, _) = epsilon_mnc(&refdata::reference_marginal_table()).unwrap();
    let eps_s = epsilon_sequential(0.984).unwrap();

    let f_ok = (eps_f - 0.06).abs() < 1e-12;
    let m_ok = (eps_m - 0.0234).abs() < 5e-4;
    let s_ok = (eps_s - 0.128).abs() < 1e-12;
    println!(
        "ACCEPTANCE epsilon-triple: {} (fraction = {:.4}, mnc = {:.4}, sequential = {:.4})",
        if f_ok && m_ok && s_ok { "PASS" } else { "FAIL" },
        eps_f,
        eps_m,
        eps_s
    );
    assert!(f_ok, "epsilon_fraction(0.97) = {eps_f}");
    assert!(m_ok, "epsilon_mnc(reference marginals) = {eps_m}");
    assert!(s_ok, "epsilon_sequential(0.984) = {eps_s}");
}

/// Noiseless calibrated settings: exact C at the Tsirelson ceiling, and a
/// million-trial-per-context sample landing within 4 sem of it.
#[test]
fn acceptance_ideal_quantum_ceiling() {
    let start = Instant::now();
    let state = QuantumState::ideal_entangled();
    let cal = calibrate_phases(&state, &default_specs()).unwrap();
    let exact_ok = (cal.c_value - TSIRELSON_BOUND).abs() < 1e-6;

    let specs = specs_with_offsets(&default_specs(), cal.offset_yb, cal.offset_ba);
    let readout = ReadoutModel::noiseless();
    let n = 1_000_000u64;
    let mut estimates: [Option<CorrelatorEstimate>; 4] = [None; 4];
    let mut contexts_ok = true;
    for ctx in ContextId::all() {
        let probs = context_probabilities(&state, ctx, &specs).unwrap();
        let acc = (0..n)
            .into_par_iter()
            .fold(MomentAccumulator::default, |mut acc, trial_index| {
                let domain = StreamDomain::Trial {
                    context: ctx.index() as u8,
                    trial_index,
                };
                let mut rng = stream_rng(424_242, domain);
                let rec = trial_from_probs(
                    &probs,
                    ctx,
                    &specs,
                    &readout,
                    &mut rng,
                    trial_index,
                    domain.stream_id(),
                );
                acc.push((rec.outcome_i * rec.outcome_j) as f64);
                acc
            })
            .reduce(MomentAccumulator::default, |mut a, b| {
                a.merge(&b);
                a
            });
        let est = acc.estimate();
        // every empirical correlator converges onto the exact expectation
        let exact = exact_correlator(&state, &specs, ctx).unwrap();
        contexts_ok &= (est.mean - exact).abs() < 4.0 / (n as f64).sqrt();
        estimates[ctx.index()] = Some(est);
    }
    let (c_sampled, sem) = chsh_statistic(&estimates).unwrap();
    let sampled_ok = (c_sampled - TSIRELSON_BOUND).abs() <= 4.0 * sem;
    // the first context alone must also land on its exact value 1/sqrt(2)
    let e01 = estimates[0].unwrap();
    let e01_ok = (e01.mean - std::f64::consts::FRAC_1_SQRT_2).abs() <= 3.0 * e01.sem;
    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed < 30.0;

    println!(
        "ACCEPTANCE ideal-quantum-ceiling: {} (exact C = {:.8}, sampled C = {:.5} +- {:.5}, {:.1} s)",
        if exact_ok && sampled_ok && time_ok { "PASS" } else { "FAIL" },
        cal.c_value,
        c_sampled,
        sem,
        elapsed
    );
    assert!(exact_ok, "calibrated exact C = {}", cal.c_value);
    assert!(
        sampled_ok,
        "sampled C = {c_sampled} is {:.1} sem away from 2 sqrt(2)",
        (c_sampled - TSIRELSON_BOUND).abs() / sem
    );
    assert!(e01_ok, "E01 = {} +- {}", e01.mean, e01.sem);
    assert!(
        contexts_ok,
        "some empirical correlator drifted beyond 4/sqrt(n)"
    );
    assert!(time_ok, "sampling took {elapsed:.1} s");
}

/// Gate dynamics: the ideal closed-loop gate is maximally entangling to
/// 1e-6, truncation is converged, and the fidelity arithmetic matches the
/// reference consistency points.
#[test]
fn acceptance_ms_gate() {
    let start = Instant::now();

    let ideal = MsParams::ideal(22.0);
    let state = ms_evolve_qubits(&ideal, ideal.gate_time_us).unwrap();
    let p = state.probabilities();
    let pop_ok = p[0] + p[3] > 1.0 - 1e-6;
    let phases: Vec<f64> = (0..24)
        .map(|k| k as f64 * std::f64::consts::TAU / 24.0)
        .collect();
    let contrast = parity_scan(&state, &phases).unwrap().contrast;
    let contrast_ok = contrast > 1.0 - 1e-6;

    // truncation convergence at the thermal reference parameters
    let mut params = MsParams::experiment_defaults();
    params.n_max = 15;
    let a = ms_evolve_qubits(&params, params.gate_time_us)
        .unwrap()
        .probabilities();
    params.n_max = 20;
    let b = ms_evolve_qubits(&params, params.gate_time_us)
        .unwrap()
        .probabilities();
    let trunc_defect = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let trunc_ok = trunc_defect < 1e-5;

    let bound = fidelity_bound(0.960, 0.919).unwrap();
    let bound_ok = (bound - 0.9395).abs() < 1e-12;

    let depolarized = apply_depolarizing(&QuantumState::ideal_entangled(), 0.081).unwrap();
    let dep_contrast = parity_scan(&depolarized, &phases).unwrap().contrast;
    let dep_ok = (dep_contrast - 0.919).abs() < 1e-3;

    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed < 60.0;
    let all = pop_ok && contrast_ok && trunc_ok && bound_ok && dep_ok && time_ok;
    println!(
        "ACCEPTANCE ms-gate: {} (P00+P11 = {:.8}, contrast = {:.8}, truncation defect = {:.1e}, \
         fidelity bound = {:.4}, depolarized contrast = {:.4}, {:.1} s)",
        if all { "PASS" } else { "FAIL" },
        p[0] + p[3],
        contrast,
        trunc_defect,
        bound,
        dep_contrast,
        elapsed
    );
    assert!(pop_ok, "P00 + P11 = {}", p[0] + p[3]);
    assert!(contrast_ok, "parity contrast = {contrast}");
    assert!(
        trunc_ok,
        "populations moved {trunc_defect:.2e} between n_max 15 and 20"
    );
    assert!(bound_ok, "fidelity_bound(0.960, 0.919) = {bound}");
    assert!(dep_ok, "contrast at p = 0.081 is {dep_contrast}");
    assert!(time_ok, "gate checks took {elapsed:.1} s");
}

/// Repeatability: exactly 1 with noiseless readout; in [0.980, 0.988] at
/// 1.5% per-readout dark-state infidelity with 1e5 runs per observable.
#[test]
fn acceptance_repeatability() {
    let start = Instant::now();
    let prep = QuantumState::ideal_entangled();

    let noiseless = ReadoutModel::noiseless();
    let mut exact_ok = true;
    for spec in default_specs() {
        let (est, _) = repeatability_protocol(&spec, &prep, &noiseless, 4000, 5).unwrap();
        exact_ok &= est.r == 1.0;
    }

    let dark_noise = ReadoutModel {
        yb: ConfusionMatrix::new(0.015, 0.0).unwrap(),
        ba: ConfusionMatrix::new(0.015, 0.0).unwrap(),
        dark_is_plus: true,
    };
    let estimates: Vec<f64> = default_specs()
        .par_iter()
        .map(|spec| {
            repeatability_protocol(spec, &prep, &dark_noise, 100_000, 29)
                .unwrap()
                .0
                .r
        })
        .collect();
    let r_mean = estimates.iter().sum::<f64>() / 4.0;
    let range_ok = (0.980..=0.988).contains(&r_mean);

    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed < 60.0;
    println!(
        "ACCEPTANCE repeatability: {} (noiseless R = 1 exactly: {}, mean R at 1.5% dark infidelity = {:.4}, {:.1} s)",
        if exact_ok && range_ok && time_ok { "PASS" } else { "FAIL" },
        exact_ok,
        r_mean,
        elapsed
    );
    assert!(exact_ok, "noiseless repeatability must be exactly 1");
    assert!(range_ok, "mean R = {r_mean} outside [0.980, 0.988]");
    assert!(time_ok, "repeatability took {elapsed:.1} s");
}

/// Crosstalk chain from the shipped parameter table alone.
///
/// The I_355 sub-check fails by construction of the inputs: inverting
/// Omega = 0.18 MHz through the table's own k and detuning values gives
/// 6.548e6 mW/cm^2, which sits 2.8% above the quoted 6.37e6 (the quoted
/// intensity corresponds to an unrounded coupling of 0.175 MHz). The
/// criterion is asserted as stated rather than loosened.
#[test]
fn acceptance_crosstalk() {
    let table = IonOpticalParams::builtin();
    let budget = crosstalk_budget(&table).unwrap();

    let checks: Vec<(&str, f64, f64, f64)> = vec![
        ("I_532", budget.intensity_532, 6.86e6, 0.01),
        ("I_355", budget.intensity_355, 6.37e6, 0.01),
        ("Omega_Yb_532", budget.rabi_yb_from_532, 0.006, 0.05),
        ("Omega_Ba_355", budget.rabi_ba_from_355, 0.009, 0.05),
        ("P_max_Yb_532", budget.p_max_yb_from_532, 1.9e-6, 0.05),
        ("P_max_Ba_355", budget.p_max_ba_from_355, 4.3e-6, 0.05),
    ];
    let mut all_ok = true;
    let mut detail = String::new();
    for (name, got, want, tol) in &checks {
        let ok = (got / want - 1.0).abs() <= *tol;
        all_ok &= ok;
        detail.push_str(&format!(
            "{name} = {got:.4e} vs {want:.2e} ({:+.2}%, tol {:.0}%): {}; ",
            (got / want - 1.0) * 100.0,
            tol * 100.0,
            if ok { "ok" } else { "FAIL" }
        ));
    }
    println!(
        "ACCEPTANCE crosstalk: {} ({detail})",
        if all_ok { "PASS" } else { "FAIL" }
    );
    for (name, got, want, tol) in &checks {
        assert!(
            (got / want - 1.0).abs() <= *tol,
            "{name} = {got:.4e} deviates {:.2}% from {want:.2e} (tolerance {:.0}%)",
            (got / want - 1.0).abs() * 100.0,
            tol * 100.0
        );
    }
}

/// Property suites: unitarity, trace preservation, the correlator
/// shrinkage law, the Tsirelson ceiling, byte-level determinism, sampling
/// consistency, and non-violation by noncontextual strategies.
#[test]
fn acceptance_property_suites() {
    let start = Instant::now();

    // unitarity of rotations over 1e4 random angle pairs
    let mut rng_like = stream_rng(3, StreamDomain::ContextOrder);
    let mut unitary_ok = true;
    {
        use rand::Rng;
        for _ in 0..10_000 {
            let theta = (rng_like.random::<f64>() - 0.5) * 20.0;
            let phi = (rng_like.random::<f64>() - 0.5) * 20.0;
            unitary_ok &= rotation(theta, phi).unitarity_defect() < 1e-12;
        }
    }
    assert!(unitary_ok, "rotation unitarity");

    // trace preservation along an evolution trace
    let params = MsParams::experiment_defaults();
    let times: Vec<f64> = (0..=30)
        .map(|k| params.gate_time_us * k as f64 / 30.0)
        .collect();
    let trace = ionctx_core::ms::evolution_trace(&params, &times).unwrap();
    let trace_defect = trace.normalization_defect();
    assert!(trace_defect < 1e-6, "trace defect {trace_defect:.2e}");

    // correlator shrinkage law at 2e5 trials per context
    let state = QuantumState::ideal_entangled();
    let specs = default_specs();
    let readout = ReadoutModel::experiment_defaults();
    let shrink = readout.yb.shrinkage() * readout.ba.shrinkage();
    let mut shrinkage_ok = true;
    for ctx in ContextId::all() {
        let probs = context_probabilities(&state, ctx, &specs).unwrap();
        let n = 200_000u64;
        let acc = (0..n)
            .into_par_iter()
            .fold(MomentAccumulator::default, |mut acc, trial_index| {
                let domain = StreamDomain::Trial {
                    context: ctx.index() as u8,
                    trial_index,
                };
                let mut rng = stream_rng(77_000 + ctx.index() as u64, domain);
                let rec = trial_from_probs(&probs, ctx, &specs, &readout, &mut rng, trial_index, 0);
                acc.push((rec.outcome_i * rec.outcome_j) as f64);
                acc
            })
            .reduce(MomentAccumulator::default, |mut a, b| {
                a.merge(&b);
                a
            });
        let est = acc.estimate();
        let exact = exact_correlator(&state, &specs, ctx).unwrap();
        shrinkage_ok &= (est.mean - shrink * exact).abs() <= 4.0 * est.sem;
        // and the full recorded prediction is also consistent
        let (e_rec, _, _) = exact_recorded_context(&state, &specs, &readout, ctx).unwrap();
        shrinkage_ok &= (est.mean - e_rec).abs() <= 4.0 * est.sem;
    }
    assert!(shrinkage_ok, "shrinkage law");

    // Tsirelson ceiling over random states and settings
    {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2718);
        for _ in 0..200 {
            let g = ionctx_core::linalg::ComplexMatrix::from_fn(4, 4, |_, _| {
                num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let gg = g.mul(&g.dagger());
            let norm = gg.trace().re;
            let rho = gg.scale(num_complex::Complex64::new(1.0 / norm, 0.0));
            let random_state = QuantumState::new(vec![2, 2], rho).unwrap();
            let mut random_specs = default_specs();
            for spec in &mut random_specs {
                spec.phase = rng.random::<f64>() * std::f64::consts::TAU;
            }
            let c = ionctx_core::analysis::exact_chsh(&random_state, &random_specs).unwrap();
            assert!(c.abs() <= TSIRELSON_BOUND + 1e-9, "|C| = {}", c.abs());
        }
    }

    // determinism: identical seeds give byte-identical trial files
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::reference_run();
    config.trials_per_setting = 500;
    config.repeatability_runs = 200;
    config.bootstrap_resamples = 50;
    run_simulation(&config, &dir.path().join("a")).unwrap();
    run_simulation(&config, &dir.path().join("b")).unwrap();
    let bytes_a = std::fs::read(dir.path().join("a/trials.txt")).unwrap();
    let bytes_b = std::fs::read(dir.path().join("b/trials.txt")).unwrap();
    assert_eq!(bytes_a, bytes_b, "determinism of trial files");

    // sampled C stays within 5 sem of the exact recorded C over 10 seeds
    let exact_c = {
        let tuned = apply_depolarizing(
            &QuantumState::ideal_entangled(),
            config.noise.depolarization,
        )
        .unwrap();
        ionctx_core::analysis::exact_recorded_chsh(
            &tuned,
            &config.to_specs().unwrap(),
            &config.readout_model().unwrap(),
        )
        .unwrap()
    };
    let mut sampling_ok = true;
    let mut sampling_config = config.clone();
    sampling_config.trials_per_setting = 10_000;
    sampling_config.bootstrap_resamples = 0;
    sampling_config.repeatability_runs = 50;
    for seed in 0..10u64 {
        sampling_config.seed = Some(9000 + seed);
        let out = run_simulation(&sampling_config, &dir.path().join(format!("s{seed}"))).unwrap();
        let dev = (out.report.c_value - exact_c).abs() / out.report.c_sem;
        sampling_ok &= dev <= 5.0;
        if seed == 0 {
            // the tuned configuration reports C near its target 2.526
            let dev_target = (out.report.c_value - 2.526).abs() / out.report.c_sem;
            sampling_ok &= dev_target <= 4.0;
        }
    }
    assert!(sampling_ok, "sampled C within 5 sem of exact across seeds");

    // no noncontextual deterministic strategy fakes a violation: 100 seeded
    // strategy mixtures at 1e4 trials per context
    let mut nc_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        use rand::Rng;
        use rand::SeedableRng;
        let mut wrng = rand_chacha::ChaCha12Rng::seed_from_u64(31_000 + seed);
        let mut weights = [0.0f64; 16];
        for w in &mut weights {
            *w = wrng.random::<f64>();
        }
        let records = generate_noncontextual_trials(5_000 + seed, 10_000, &weights);
        let batches = group_by_context(&records);
        let estimates = batches.map(|b| correlator(&b).ok());
        let (c, sem) = chsh_statistic(&estimates).unwrap();
        let significance = violation_significance(c, sem, 0.0).unwrap();
        worst = worst.max(significance);
        nc_ok &= significance <= 5.0;
    }
    assert!(
        nc_ok,
        "noncontextual strategy exceeded 5 sigma (worst {worst:.2})"
    );

    let elapsed = start.elapsed().as_secs_f64();
    let time_ok = elapsed < 300.0;
    println!(
        "ACCEPTANCE property-suites: {} (trace defect {:.1e}, worst classical significance {:.2} sigma, {:.1} s)",
        if time_ok { "PASS" } else { "FAIL" },
        trace_defect,
        worst,
        elapsed
    );
    assert!(time_ok, "property suites took {elapsed:.1} s");
}
