//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rotation atoms require an even dimension, got d = {d}")]
    OddRotationDim { d: usize },

    #[error("{table} id {id} out of range (table has {len} rows)")]
    IdOutOfRange {
        table: &'static str,
        id: usize,
        len: usize,
    },

    #[error("operator pipeline is invalid: {reason}")]
    InvalidPipeline { reason: String },

    #[error("time atoms present but no carrier designated and pipeline is not direct-composition")]
    CarrierMissing,

    #[error("operation requires variant {expected}, got {got}")]
    VariantMismatch { expected: String, got: String },

    #[error("unknown variant `{0}`")]
    UnknownVariant(String),

    #[error("non-finite value in {what}{}", example.map(|i| format!(" (example {i})")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        example: Option<usize>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("bad file format in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("facts already carry augmented relation ids (rel {rel} >= |R| = {num_relations})")]
    AlreadyAugmented { rel: u32, num_relations: u32 },

    #[error("need at least 2 timestamps for temporal smoothing, have {0}")]
    TooFewTimestamps(usize),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("degenerate witness: {0}")]
    DegenerateWitness(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
