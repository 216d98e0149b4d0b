//! The contextuality report: correlators, marginals, C, the three
//! epsilon-corrected bounds, and violation significances, rendered as a
//! structured text block and as a flat machine-readable JSON document.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::analysis::{
    bootstrap_epsilon_mnc_sem, chsh_statistic, epsilon_fraction_with, epsilon_mnc,
    epsilon_sequential_with, violation_significance, ContextStats, MarginalTable,
};
use crate::error::Result;
use crate::measurement::{ContextId, RepeatabilityEstimate};

use super::config::ExperimentConfig;

/// Where the repeatability number feeding the epsilon models came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepeatabilitySource {
    Measured,
    Nominal,
    Missing,
}

impl RepeatabilitySource {
    fn label(self) -> &'static str {
        match self {
            RepeatabilitySource::Measured => "measured",
            RepeatabilitySource::Nominal => "nominal",
            RepeatabilitySource::Missing => "missing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RepeatabilitySummary {
    pub per_observable: Vec<RepeatabilityEstimate>,
    pub mean: f64,
}

#[derive(Clone, Debug)]
pub struct ContextualityReport {
    pub contexts: [ContextStats; 4],
    pub marginals: MarginalTable,
    pub c_value: f64,
    pub c_sem: f64,
    pub repeatability: Option<RepeatabilitySummary>,
    pub repeatability_source: RepeatabilitySource,
    /// Mean repeatability feeding epsilon_sequential (measured or nominal).
    pub repeatability_mean: Option<f64>,
    /// Fraction f feeding epsilon_fraction (R^2 when measured).
    pub fraction_f: Option<f64>,
    pub epsilon_fraction: Option<f64>,
    pub epsilon_mnc: f64,
    pub epsilon_mnc_sem_linear: f64,
    pub epsilon_mnc_sem_bootstrap: Option<f64>,
    pub epsilon_sequential: Option<f64>,
    /// Significance against the uncorrected bound 2.
    pub significance_noise_free: f64,
    pub significance_fraction: Option<f64>,
    pub significance_mnc: f64,
    pub significance_sequential: Option<f64>,
}

/// Assemble the full report from per-context outcome batches and, when
/// available, measured repeatability estimates.
pub fn build_report(
    batches: &[Vec<(i8, i8)>; 4],
    repeatability: Option<&[RepeatabilityEstimate]>,
    config: &ExperimentConfig,
) -> Result<ContextualityReport> {
    let mut stats: [Option<ContextStats>; 4] = [None; 4];
    for ctx in ContextId::all() {
        let batch = &batches[ctx.index()];
        if batch.len() >= 2 {
            stats[ctx.index()] = Some(ContextStats::from_outcomes(ctx, batch)?);
        }
    }
    let correlators = stats.map(|s| s.map(|s| s.correlator));
    let (c_value, c_sem) = chsh_statistic(&correlators)?;
    let contexts = [
        stats[0].unwrap(),
        stats[1].unwrap(),
        stats[2].unwrap(),
        stats[3].unwrap(),
    ];
    let marginals = MarginalTable::from_contexts(&contexts);
    let (eps_mnc, eps_mnc_sem) = epsilon_mnc(&marginals)?;
    let bootstrap_sem = if config.bootstrap_resamples >= 2 {
        Some(bootstrap_epsilon_mnc_sem(
            batches,
            config.bootstrap_resamples,
            config.seed.unwrap_or(0),
        )?)
    } else {
        None
    };

    let (repeatability, source, r_mean) = match repeatability {
        Some(estimates) if !estimates.is_empty() => {
            let mean = estimates.iter().map(|e| e.r).sum::<f64>() / estimates.len() as f64;
            (
                Some(RepeatabilitySummary {
                    per_observable: estimates.to_vec(),
                    mean,
                }),
                RepeatabilitySource::Measured,
                Some(mean),
            )
        }
        _ => match config.epsilon.nominal_repeatability {
            Some(r) => (None, RepeatabilitySource::Nominal, Some(r)),
            None => (None, RepeatabilitySource::Missing, None),
        },
    };
    let fraction_f = match source {
        RepeatabilitySource::Measured => r_mean.map(|r| r * r),
        RepeatabilitySource::Nominal => config.epsilon.nominal_fraction.or(r_mean.map(|r| r * r)),
        RepeatabilitySource::Missing => None,
    };
    let eps_fraction = fraction_f
        .map(|f| epsilon_fraction_with(f, config.epsilon.algebraic_max))
        .transpose()?;
    let eps_sequential = r_mean
        .map(|r| epsilon_sequential_with(r, config.epsilon.sequential_coefficient))
        .transpose()?;

    let significance_noise_free = violation_significance(c_value, c_sem, 0.0)?;
    let significance_fraction = eps_fraction
        .map(|e| violation_significance(c_value, c_sem, e))
        .transpose()?;
    let significance_mnc = violation_significance(c_value, c_sem, eps_mnc)?;
    let significance_sequential = eps_sequential
        .map(|e| violation_significance(c_value, c_sem, e))
        .transpose()?;

    Ok(ContextualityReport {
        contexts,
        marginals,
        c_value,
        c_sem,
        repeatability,
        repeatability_source: source,
        repeatability_mean: r_mean,
        fraction_f,
        epsilon_fraction: eps_fraction,
        epsilon_mnc: eps_mnc,
        epsilon_mnc_sem_linear: eps_mnc_sem,
        epsilon_mnc_sem_bootstrap: bootstrap_sem,
        epsilon_sequential: eps_sequential,
        significance_noise_free,
        significance_fraction,
        significance_mnc,
        significance_sequential,
    })
}

fn fmt_opt(value: Option<f64>, digits: usize) -> String {
    match value {
        Some(v) => format!("{v:.digits$}"),
        None => "not computed".into(),
    }
}

/// Human-readable report block.
pub fn render_text(report: &ContextualityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "contextuality report");
    let _ = writeln!(out, "====================");
    let _ = writeln!(
        out,
        "context   <O_i O_j>            <O_i>^(j)            <O_j>^(i)            n"
    );
    for s in &report.contexts {
        let (i, j) = s.context.pair();
        let _ = writeln!(
            out,
            "{{{i},{j}}}     {:+.4} +- {:.4}     {:+.4} +- {:.4}     {:+.4} +- {:.4}     {}",
            s.correlator.mean,
            s.correlator.sem,
            s.marginal_first.mean,
            s.marginal_first.sem,
            s.marginal_second.mean,
            s.marginal_second.sem,
            s.correlator.n,
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "C = E01 + E12 + E23 - E30 = {:.4} +- {:.4}",
        report.c_value, report.c_sem
    );
    if let Some(rep) = &report.repeatability {
        for est in &rep.per_observable {
            let _ = writeln!(
                out,
                "R_{} = {:.4} +- {:.4}  ({} of {} runs retained)",
                est.observable, est.r, est.sem, est.retained, est.total
            );
        }
    }
    let _ = writeln!(
        out,
        "mean repeatability = {} ({})",
        fmt_opt(report.repeatability_mean, 4),
        report.repeatability_source.label()
    );
    let _ = writeln!(out, "fraction f = {}", fmt_opt(report.fraction_f, 4));
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "noncontextual bounds 2 + epsilon and violation significance:"
    );
    let _ = writeln!(
        out,
        "  noise-free model:      epsilon = 0.0000              significance = {:.1} sigma",
        report.significance_noise_free
    );
    let _ = writeln!(
        out,
        "  fraction model:        epsilon = {}              significance = {} sigma",
        fmt_opt(report.epsilon_fraction, 4),
        fmt_opt(report.significance_fraction, 1)
    );
    let boot = report
        .epsilon_mnc_sem_bootstrap
        .map(|s| format!(", bootstrap +- {s:.4}"))
        .unwrap_or_default();
    let _ = writeln!(
        out,
        "  maximally-nc model:    epsilon = {:.4} +- {:.4}{boot}  significance = {:.1} sigma",
        report.epsilon_mnc, report.epsilon_mnc_sem_linear, report.significance_mnc
    );
    let _ = writeln!(
        out,
        "  sequential model:      epsilon = {}              significance = {} sigma",
        fmt_opt(report.epsilon_sequential, 4),
        fmt_opt(report.significance_sequential, 1)
    );
    out
}

fn opt_value(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!(x),
        None => Value::Null,
    }
}

/// Flat key-value JSON document; keys are documented in the repository
/// README.
pub fn render_json(report: &ContextualityReport) -> Value {
    let mut map = Map::new();
    for s in &report.contexts {
        let (i, j) = s.context.pair();
        let label = format!("{i}{j}");
        map.insert(format!("correlator_{label}"), json!(s.correlator.mean));
        map.insert(format!("correlator_{label}_sem"), json!(s.correlator.sem));
        map.insert(format!("n_{label}"), json!(s.correlator.n));
        map.insert(
            format!("marginal_{i}_with_{j}"),
            json!(s.marginal_first.mean),
        );
        map.insert(
            format!("marginal_{i}_with_{j}_sem"),
            json!(s.marginal_first.sem),
        );
        map.insert(
            format!("marginal_{j}_with_{i}"),
            json!(s.marginal_second.mean),
        );
        map.insert(
            format!("marginal_{j}_with_{i}_sem"),
            json!(s.marginal_second.sem),
        );
    }
    map.insert("c_value".into(), json!(report.c_value));
    map.insert("c_sem".into(), json!(report.c_sem));
    if let Some(rep) = &report.repeatability {
        for est in &rep.per_observable {
            map.insert(format!("repeatability_{}", est.observable), json!(est.r));
            map.insert(
                format!("repeatability_{}_sem", est.observable),
                json!(est.sem),
            );
        }
    }
    map.insert(
        "repeatability_mean".into(),
        opt_value(report.repeatability_mean),
    );
    map.insert(
        "repeatability_source".into(),
        json!(report.repeatability_source.label()),
    );
    map.insert("fraction_f".into(), opt_value(report.fraction_f));
    map.insert(
        "epsilon_fraction".into(),
        opt_value(report.epsilon_fraction),
    );
    map.insert("epsilon_mnc".into(), json!(report.epsilon_mnc));
    map.insert(
        "epsilon_mnc_sem_linear".into(),
        json!(report.epsilon_mnc_sem_linear),
    );
    map.insert(
        "epsilon_mnc_sem_bootstrap".into(),
        opt_value(report.epsilon_mnc_sem_bootstrap),
    );
    map.insert(
        "epsilon_sequential".into(),
        opt_value(report.epsilon_sequential),
    );
    map.insert(
        "significance_noise_free".into(),
        json!(report.significance_noise_free),
    );
    map.insert(
        "significance_fraction".into(),
        opt_value(report.significance_fraction),
    );
    map.insert("significance_mnc".into(), json!(report.significance_mnc));
    map.insert(
        "significance_sequential".into(),
        opt_value(report.significance_sequential),
    );
    Value::Object(map)
}
