//! Experiment harness for `calf-core`: portable weights files, experiment
//! configuration, multi-trial sweeps with CSV output, training and
//! certificate drivers. The `calf` binary is a thin layer over this crate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod train;
pub mod tuning;
pub mod weights;

pub use config::{CriticSource, ExperimentConfig, Mode, PolicySource};
pub use experiment::{run_experiment, run_modes, write_outputs, ExperimentOutput};
pub use weights::{load_portable_weights, save_portable_weights, WeightsError};
