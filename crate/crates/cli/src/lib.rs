//! Experiment runner library behind the `sjrp` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Failures with their own exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Missing(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Missing(m) => write!(f, "missing input: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_MISSING: u8 = 4;
pub const EXIT_NUMERIC: u8 = 5;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(c) = e.downcast_ref::<CliError>() {
        return match c {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Missing(_) => EXIT_MISSING,
        };
    }
    match e.downcast_ref::<sjrp_core::Error>() {
        Some(sjrp_core::Error::Config(_)) => EXIT_CONFIG,
        Some(sjrp_core::Error::Checkpoint(_)) => EXIT_MISSING,
        Some(sjrp_core::Error::Divergence { .. } | sjrp_core::Error::NonConvergence { .. } | sjrp_core::Error::Numeric(_)) => EXIT_NUMERIC,
        _ => EXIT_FAILURE,
    }
}
