//! Command implementations behind the `tsr` binary: dataset checks, feature
//! caches, training, evaluation, tuning and the all-pipelines benchmark.

pub mod cache;
pub mod commands;
pub mod report;
pub mod synth;

pub use commands::CliError;
