//! Simulator and analysis toolkit for a dual-species (Yb/Ba) trapped-ion
//! contextuality test: exact quantum dynamics of the entangling gate,
//! trial-level Monte Carlo of the measurement layer, and evaluation of the
//! CHSH-form noncontextuality inequality against epsilon-corrected bounds.

pub mod analysis;
pub mod crosstalk;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod measurement;
pub mod ms;
pub mod observable;
pub mod refdata;
pub mod rng;
pub mod state;

pub use error::{Error, Result};
pub use linalg::{tensor, ComplexMatrix};
pub use measurement::{ConfusionMatrix, ContextId, ReadoutModel, TrialRecord};
pub use observable::{default_specs, observable_from_phase, rotation, Ion, ObservableSpec};
pub use state::{apply_depolarizing, expectation, QuantumState};
