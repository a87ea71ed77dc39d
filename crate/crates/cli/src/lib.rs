//! Command-line harness: configuration, dispatch to the `salem-core`
//! pipelines and deterministic artifact emission.

pub mod commands;
pub mod config;
pub mod emit;

use std::fmt;
use std::path::PathBuf;

pub use config::{Cli, Command, Format, RunArgs, RunConfig};

/// Crate version and `git describe` of the build, recorded in every JSON artifact.
pub const BUILD: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SALEM_LAB_BUILD"));

/// A rejected flag or precondition; maps to exit status 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// What a finished run produced.
#[derive(Debug)]
pub struct Outcome {
    /// False when a checked bound or identity was violated (exit status 2).
    pub passed: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    commands::run(cfg)
}
