use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the receiver library.
#[derive(Debug, Error)]
pub enum BerdError {
    #[error("unknown modulation `{0}`")]
    UnknownModulation(String),

    #[error("unknown code `{0}`")]
    UnknownCode(String),

    #[error("length {len} is not a multiple of {multiple}")]
    NotMultiple { len: usize, multiple: usize },

    #[error("expected length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis {0} does not fit the frame")]
    Infeasible(String),

    #[error("every hypothesis is infeasible")]
    NoFeasibleHypothesis,

    #[error("ground truth is not available for this frame")]
    MissingTruth,

    #[error("parity-check matrix is rank deficient (rank {rank}, {rows} rows)")]
    RankDeficient { rank: usize, rows: usize },

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BerdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BerdError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        BerdError::Parse {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = BerdError> = std::result::Result<T, E>;
