use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid subsystem mask: {0}")]
    InvalidMask(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("system too large: {what} needs {n} qubits, limit is {limit}")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("inconsistent records: {0}")]
    InconsistentRecords(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("record schema version {found} is newer than supported version {supported}")]
    UnsupportedSchema { found: u32, supported: u32 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    ///
    /// 2 = configuration or usage, 3 = I/O, 4 = data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidMask(_) => 2,
            Error::TooLarge { .. } => 2,
            Error::Io(_) => 3,
            Error::Parse { .. }
            | Error::UnsupportedSchema { .. }
            | Error::InconsistentRecords(_)
            | Error::InsufficientSamples { .. }
            | Error::InvalidState(_) => 4,
        }
    }
}
