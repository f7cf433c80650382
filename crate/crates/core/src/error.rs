use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain specification: {0}")]
    InvalidSpec(String),

    #[error("Hilbert space dimension {dim} exceeds the dense cap of {cap} states")]
    DimensionCap { dim: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("requested {requested} states but only {available} are available")]
    SelectionTooLarge { requested: usize, available: usize },

    #[error("site {site} out of range for a chain of length {length}")]
    SiteOutOfRange { site: usize, length: usize },

    #[error("two-site quantities need distinct sites, got ({0}, {0})")]
    SameSite(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("operation requires local dimension {expected}, got {found}")]
    LocalDimension { expected: usize, found: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("collapsed curves have no common x-range")]
    NoOverlap,

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("cannot read {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed state file: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
