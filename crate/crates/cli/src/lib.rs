//! Experiment runner for the Task & Talk laboratory: presets, flat TOML
//! configuration, versioned checkpoints and report files.

pub mod checkpoint;
pub mod config;
pub mod preset;
pub mod report;
pub mod run;

pub use checkpoint::{Checkpoint, CheckpointError, Provenance, FORMAT_VERSION};
pub use config::ConfigFile;
pub use preset::{ExperimentPreset, PresetName};
pub use run::{train, RunSpec, RunSummary, TrainOptions};
