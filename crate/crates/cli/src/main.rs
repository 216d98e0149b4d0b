//! Command-line front end: simulate runs, ingest and analyze trial files,
//! run the repeatability protocol, and print the Raman crosstalk budget.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ionctx_core::crosstalk::{crosstalk_budget_at, IonOpticalParams};
use ionctx_core::driver::{
    build_report, ingest, read_repeatability, render_json, render_text, run_simulation,
    ExperimentConfig,
};
use ionctx_core::measurement::{
    estimate_repeatability, repeatability_protocol, RepeatabilityEstimate,
};
use ionctx_core::state::{apply_depolarizing, QuantumState};

#[derive(Parser)]
#[command(
    name = "ionctx",
    version,
    about = "Dual-species trapped-ion contextuality test: simulator and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (TOML); defaults are noise-free when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Override trials per setting.
    #[arg(long)]
    trials: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = Some(seed);
        }
        if let Some(trials) = self.trials {
            config.trials_per_setting = trials;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the full seeded simulation and write all artifacts.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for trial files, reports, and the manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a trial file and print per-context counts.
    Ingest {
        /// Trial file to read.
        #[arg(long)]
        file: PathBuf,
    },
    /// Compute the contextuality report from a trial file.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trial file to read.
        #[arg(long)]
        file: PathBuf,
        /// Optional repeatability record file accompanying the trials.
        #[arg(long)]
        repeatability: Option<PathBuf>,
        /// Also print the machine-readable JSON document.
        #[arg(long)]
        json: bool,
    },
    /// Simulate the double-measurement repeatability protocol only.
    Repeatability {
        #[command(flatten)]
        config: ConfigArgs,
        /// Runs per observable (overrides the configuration).
        #[arg(long)]
        runs: Option<u64>,
    },
    /// Print the Raman crosstalk budget for the wrong-ion couplings.
    Crosstalk {
        /// Alternative ion parameter table (TOML).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Target coupling |Omega|/2pi in MHz on both ions.
        #[arg(long, default_value_t = 0.18)]
        rabi: f64,
    },
    /// Recompute report artifacts from an existing trial file.
    Report {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trial file to read.
        #[arg(long)]
        file: PathBuf,
        /// Optional repeatability record file.
        #[arg(long)]
        repeatability: Option<PathBuf>,
        /// Output directory for report.txt / report.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn measured_estimates(path: &Path) -> anyhow::Result<Vec<RepeatabilityEstimate>> {
    let records = read_repeatability(path)
        .with_context(|| format!("reading repeatability file {}", path.display()))?;
    let mut estimates = Vec::new();
    for observable in 0..4 {
        let batch: Vec<_> = records
            .iter()
            .filter(|r| r.observable == observable)
            .copied()
            .collect();
        if !batch.is_empty() {
            estimates.push(estimate_repeatability(observable, &batch)?);
        }
    }
    if estimates.is_empty() {
        bail!("repeatability file {} holds no records", path.display());
    }
    Ok(estimates)
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out } => {
            let config = config.load()?;
            let output = run_simulation(&config, &out)?;
            println!("{}", render_text(&output.report));
            println!("artifacts written to {}", output.out_dir.display());
            println!("config hash {}", output.manifest.config_hash);
            if let Some(cal) = &output.manifest.calibration {
                println!(
                    "calibrated frame offsets: yb = {:.6} rad, ba = {:.6} rad (exact C = {:.6}{})",
                    cal.offset_yb,
                    cal.offset_ba,
                    cal.exact_c,
                    if cal.degenerate { ", degenerate" } else { "" }
                );
            }
        }
        Command::Ingest { file } => {
            let (records, batches) = ingest(&file)?;
            println!("{}: {} records", file.display(), records.len());
            for (ctx, batch) in ionctx_core::measurement::ContextId::all()
                .iter()
                .zip(&batches)
            {
                println!("  context {{{ctx}}}: {} trials", batch.len());
            }
        }
        Command::Analyze {
            config,
            file,
            repeatability,
            json,
        } => {
            let config = config.load()?;
            let (_, batches) = ingest(&file)?;
            let estimates = repeatability
                .as_deref()
                .map(measured_estimates)
                .transpose()?;
            let report = build_report(&batches, estimates.as_deref(), &config)?;
            println!("{}", render_text(&report));
            if json {
                println!("{}", serde_json::to_string_pretty(&render_json(&report))?);
            }
        }
        Command::Repeatability { config, runs } => {
            let config = config.load()?;
            let seed = config
                .seed
                .ok_or_else(|| anyhow::anyhow!("repeatability simulation needs a seed"))?;
            let n_runs = runs.unwrap_or(config.repeatability_runs);
            let state = apply_depolarizing(
                &QuantumState::ideal_entangled(),
                config.noise.depolarization,
            )?;
            let readout = config.readout_model()?;
            let mut mean = 0.0;
            for spec in config.to_specs()? {
                let (est, _) = repeatability_protocol(&spec, &state, &readout, n_runs, seed)?;
                println!(
                    "R_{} = {:.4} +- {:.4}  ({} of {} runs retained)",
                    est.observable, est.r, est.sem, est.retained, est.total
                );
                mean += est.r / 4.0;
            }
            println!("mean repeatability = {mean:.4}");
        }
        Command::Crosstalk { params, rabi } => {
            let table = match params {
                Some(path) => IonOpticalParams::from_path(&path)?,
                None => IonOpticalParams::builtin(),
            };
            let budget = crosstalk_budget_at(&table, rabi)?;
            println!(
                "raman crosstalk budget at |Omega|/2pi = {:.3} MHz",
                budget.target_rabi_mhz
            );
            println!(
                "  I_355 = {:.3e} mW/cm^2   (Yb target coupling)",
                budget.intensity_355
            );
            println!(
                "  I_532 = {:.3e} mW/cm^2   (Ba target coupling)",
                budget.intensity_532
            );
            println!("  wrong-ion couplings:");
            println!("    |Omega_Yb,532| = {:.4e} MHz", budget.rabi_yb_from_532);
            println!("    |Omega_Ba,355| = {:.4e} MHz", budget.rabi_ba_from_355);
            println!(
                "  comb detuning used for both species: {:.1} MHz (Yb nearest comb line m = {} sits {:.1} MHz away)",
                budget.detuning_mhz, budget.yb_comb_line, budget.yb_comb_detuning_mhz
            );
            println!("  single-pulse population transfers:");
            println!("    P_max(Yb from 532) = {:.2e}", budget.p_max_yb_from_532);
            println!("    P_max(Ba from 355) = {:.2e}", budget.p_max_ba_from_355);
            if budget.negligible() {
                println!(
                    "verdict: crosstalk is negligible for the contextuality test (worst transfer {:.2e} < 1e-5)",
                    budget.worst_transfer()
                );
            } else {
                println!(
                    "verdict: crosstalk is NOT negligible (worst transfer {:.2e} >= 1e-5)",
                    budget.worst_transfer()
                );
            }
        }
        Command::Report {
            config,
            file,
            repeatability,
            out,
        } => {
            let config = config.load()?;
            let (_, batches) = ingest(&file)?;
            let estimates = repeatability
                .as_deref()
                .map(measured_estimates)
                .transpose()?;
            let report = build_report(&batches, estimates.as_deref(), &config)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("report.txt"), render_text(&report))?;
            std::fs::write(
                out.join("report.json"),
                serde_json::to_string_pretty(&render_json(&report))? + "\n",
            )?;
            println!("{}", render_text(&report));
            println!("report written to {}", out.display());
        }
    }
    Ok(())
}
