//! Experiment harness: JSON configs in, trajectory CSVs and run summaries out.

pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod suite;
pub mod summary;
pub mod sweep;

pub use config::{Assertion, Dynamic, ExperimentConfig, Quantity};
pub use error::{HarnessError, Result};
pub use popdyn_core as core;
pub use run::{execute, run_experiment, run_experiment_in, summarize, Record};
pub use suite::{CriterionResult, Fixtures, Suite, CRITERIA};
pub use summary::{ChannelStats, RunSummary, SCHEMA_VERSION};
pub use sweep::{run_sweep, run_sweep_in, set_axis, SweepSummary};
