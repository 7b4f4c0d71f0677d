//! Library side of the `gascert` command: config loading, reports and the
//! subcommands, kept separate from argument parsing so tests can drive them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod report;

pub const EXIT_OK: i32 = 0;
/// Usage, input or solver error.
pub const EXIT_INPUT: i32 = 1;
/// Analysis ran and the stability condition does not hold.
pub const EXIT_FAILED: i32 = 2;
/// Simulation left the divergence limit.
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gascert_core::Error),
    #[error("trace: {0}")]
    Csv(#[from] csv::Error),
}
