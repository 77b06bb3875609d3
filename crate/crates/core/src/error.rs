use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid challenge: {0}")]
    InvalidChallenge(String),

    #[error("stage count must be at least 1")]
    ZeroStages,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("stage count mismatch: instance has {expected} stages, challenge has {found}")]
    StageMismatch { expected: usize, found: usize },

    #[error("invalid loop geometry: {0}")]
    InvalidLoop(String),

    #[error("unknown loop configuration `{id}` (valid: {valid})")]
    UnknownLoopConfig { id: String, valid: String },

    #[error("composition has no members: {0}")]
    EmptyComposition(&'static str),

    #[error("auxiliary subset out of range: {0}")]
    SubsetOutOfRange(String),

    #[error("interpose position {position} out of range 1..={max}")]
    InterposeOutOfRange { position: usize, max: usize },

    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),

    #[error("dataset format version mismatch: {0}")]
    VersionMismatch(String),

    #[error("dataset truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("dataset header checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("insufficient records: requested {requested}, available {available}")]
    InsufficientRecords { requested: usize, available: usize },

    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Config(e.to_string())
    }
}
