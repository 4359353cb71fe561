//! Experiment runner around the `abcs` solver: configuration, image and
//! operator files, measurement generation, the finite-difference baseline and
//! results records.

// comparisons of the form `!(a < b)` also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod error;
pub mod experiment;
pub mod image_io;
pub mod operator_io;
pub mod record;
pub mod synthetic;
pub mod tv;

pub use config::{resolve_eta, ExperimentConfig, NoiseModel};
pub use error::{CliError, CliResult};
pub use experiment::{reconstruct, run_experiment, run_sense, sense_image, ExperimentOutcome, Mode};
