//! End-to-end orchestration: configuration, seeded trial generation,
//! flat-file persistence, ingestion of external datasets, and report
//! emission.

mod config;
mod report;
mod run;
mod trialfile;

pub use config::{EpsilonConfig, ExperimentConfig, NoiseConfig, ObservableConfig, StatePrepConfig};
pub use report::{
    build_report, render_json, render_text, ContextualityReport, RepeatabilitySummary,
};
pub use run::{generate_noncontextual_trials, run_simulation, OutputFiles, RunManifest, RunOutput};
pub use trialfile::{
    ingest, read_repeatability, read_trials, write_repeatability, write_trials,
    REPEATABILITY_HEADER, TRIALS_HEADER,
};
