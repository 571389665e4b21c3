//! Command-line front end: scenario files, commands and report formatting.

pub mod commands;
pub mod plot;
pub mod report;
pub mod scenario;

use cakeshare_core::fairness::FairnessError;
use cakeshare_core::games::GameError;
use cakeshare_core::protocols::ProtocolError;
use cakeshare_core::valuation::ValuationError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("agent `{agent}`: {source}")]
    Valuation {
        agent: String,
        source: ValuationError,
    },
    #[error("bad option: {0}")]
    BadOption(String),
    #[error("scenario has no {0} section")]
    MissingSection(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

impl CliError {
    /// 2 for invalid input, 3 for unreadable or unparsable files, 4 for
    /// failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Parse { .. } => 3,
            CliError::Validation { .. }
            | CliError::Valuation { .. }
            | CliError::BadOption(_)
            | CliError::MissingSection(_) => 2,
            CliError::Protocol(_)
            | CliError::Fairness(_)
            | CliError::Game(_)
            | CliError::Compute(_)
            | CliError::Write { .. } => 4,
        }
    }
}
