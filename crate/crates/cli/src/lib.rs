//! Experiment runner for quantile-oriented sensitivity indices: model
//! files, grid sweeps, CSV/JSON output and the validation suite behind the
//! `qosa` binary.

pub mod config;
pub mod grid;
pub mod model_file;
pub mod output;
pub mod runner;
pub mod validate;
