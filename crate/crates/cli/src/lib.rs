//! Batch front-end for ionrot: config parsing, job dispatch and result bundles.

pub mod config;
pub mod output;
pub mod run;

pub use config::{validate, Command, ConfigError, Diagnostic, RawConfig, RunConfig, Severity};
pub use run::{load, run, Overrides, RunError};
