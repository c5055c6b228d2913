use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("invalid object dimensions: {0}")]
    ObjectDimensions(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("label out of range: {0}")]
    LabelOutOfRange(String),

    #[error("missing evidence: {0}")]
    MissingEvidence(String),

    #[error("inconsistent scene state: {0}")]
    InconsistentState(String),

    #[error("state space of {size} assignments exceeds cap {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite objective during learning at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("schema error at line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    #[error("label-space fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { expected: String, found: String },

    #[error("malformed probability map: {0}")]
    Pgm(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable short identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LabelSpace(_) => "label_space",
            Error::ObjectDimensions(_) => "object_dimensions",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LabelOutOfRange(_) => "label_out_of_range",
            Error::MissingEvidence(_) => "missing_evidence",
            Error::InconsistentState(_) => "inconsistent_state",
            Error::StateSpaceTooLarge { .. } => "state_space_too_large",
            Error::InvalidConfig(_) => "invalid_config",
            Error::NonFinite { .. } => "non_finite",
            Error::Schema { .. } => "schema",
            Error::Fingerprint { .. } => "fingerprint_mismatch",
            Error::Pgm(_) => "pgm",
            Error::MissingFile(_) => "missing_file",
            Error::Manifest(_) => "manifest",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::Csv(_) => "csv",
        }
    }
}
