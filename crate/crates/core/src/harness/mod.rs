//! Declarative experiments: configs, presets, seeded runs, sweeps and
//! two-stage hyperparameter selection.

pub mod config;
pub mod presets;
mod runner;
pub mod sweep;

pub use config::ExperimentConfig;
pub use presets::{preset, preset_names};
pub use runner::{run, run_with, RunResult};
pub use sweep::{sweep, two_stage_select, Selection, SweepOutput};
