//! Experiment runner behind the `driftbench` binary.
//!
//! Four experiment types share one pipeline: a source (generator or CSV,
//! optionally replayed through an in-process topic), a learner arm, an
//! evaluator and a trace sink.

pub mod cli;
pub mod config;
pub mod runner;
pub mod summarize;

use std::fmt::Display;

/// Failure classes of a command, mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config; detected before any computation.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] driftbench::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn config(msg: impl Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) | CliError::Failed(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}
