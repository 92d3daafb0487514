//! Experiment runner for `levy_em`: a TOML config in, CSV/JSON results and
//! a manifest out.
//!
//! The binary `levy-em` wraps [`run::run`], [`validate::validate`] and
//! [`plotdata::emit_plotdata`]. Output is byte-identical for a given config
//! and seed, whatever the number of worker threads.

pub mod config;
pub mod error;
pub mod plotdata;
pub mod run;
pub mod validate;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use run::{run, RunManifest, RunOptions, RunOutcome};
pub use validate::{validate, Diagnostic};

/// Exit code of `run --assert` when a study misses its threshold.
pub const EXIT_ASSERT: i32 = 3;
/// Exit code for a config that does not validate.
pub const EXIT_INVALID: i32 = 2;
