//! Library side of the `ed4sim` command: configuration, subcommand bodies
//! and artifact writers.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::process::ExitCode;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verification(String),
    Divergent(String),
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Simulation(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Divergent(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Divergent(m) => write!(f, "out of threshold: {m}"),
            CliError::Simulation(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ed4sim::Error> for CliError {
    fn from(e: ed4sim::Error) -> Self {
        match e {
            ed4sim::Error::Divergent(m) => CliError::Divergent(m),
            ed4sim::Error::Config(m) => CliError::Usage(m),
            other => CliError::Simulation(other.to_string()),
        }
    }
}
