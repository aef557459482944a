//! Library side of the `circsearch` binary: configuration handling and the
//! four subcommands, kept here so they can be driven from tests.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{cmd_curves, cmd_simulate, cmd_sweep, cmd_trajectories, run, Command};
pub use config::{Flags, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration; nothing was written.
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }

    /// Parameter and model errors are configuration errors; caps and
    /// malformed inputs met while working are runtime errors.
    pub fn from_core(e: circsearch::Error) -> Self {
        use circsearch::Error as E;
        match e {
            E::Domain { .. } | E::InvalidModel(_) | E::InvalidParam { .. } | E::DimensionMismatch(_) => {
                CliError::Config(e.to_string())
            }
            E::TableCapExceeded { .. } | E::CodebookTooLarge { .. } | E::EmptyTable | E::Format(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}
