//! Error type shared by every module of the crate.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (e.g. a factorization).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("line {line}: invalid header: {message}")]
    InvalidHeader { line: usize, message: String },

    #[error("line {line}, candidate {candidate}: bitset decodes to {found} bits, expected {expected}")]
    BitsetLength {
        line: usize,
        candidate: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: true_index {true_index} out of range for {candidates} candidates")]
    TrueIndexOutOfRange {
        line: usize,
        true_index: i64,
        candidates: usize,
    },

    #[error("line {line}, candidate {candidate}: fingerprint has no bits set")]
    ZeroFingerprint { line: usize, candidate: usize },

    #[error("line {line}: {candidates} candidates exceed the cap of {cap}")]
    CapExceeded {
        line: usize,
        candidates: usize,
        cap: usize,
    },

    #[error("prediction file: {0}")]
    PredictionFormat(String),

    #[error("prediction record {record} ({id:?}): {message}")]
    PredictionRecord {
        record: usize,
        id: String,
        message: String,
    },

    #[error("embeddings missing for instances: {}", ids.join(", "))]
    MissingEmbeddings { ids: Vec<String> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of a numerical procedure rather than of its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
