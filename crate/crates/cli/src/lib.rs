//! Command-line front end for the localization benchmark.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use config::{parse_config, serialize_config, CliConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<rssloc::Error> for CliError {
    fn from(e: rssloc::Error) -> Self {
        match e {
            rssloc::Error::Io { .. } | rssloc::Error::Csv { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
