use std::path::PathBuf;

/// Every failure the toolkit reports.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("training of basis {basis} failed: {source}")]
    BasisTraining {
        basis: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate metric input: {0}")]
    DegenerateMetric(String),

    #[error("basis {0} is not present in the library")]
    MissingBasis(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("least-squares problem is underdetermined: {samples} samples for {basis} basis functions")]
    Underdetermined { samples: usize, basis: usize },

    #[error("requested degree {requested} exceeds library maximum degree {available}")]
    DegreeTooHigh { requested: usize, available: usize },

    #[error("model was fitted against library {expected} but library {got} was supplied")]
    LibraryMismatch { expected: String, got: String },

    #[error("unsupported library format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error("library validation failed: {0}")]
    Validation(String),

    #[error("unknown target '{name}'; available: {available}")]
    UnknownTarget { name: String, available: String },

    #[error("unknown experiment '{name}'; available: {available}")]
    UnknownExperiment { name: String, available: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
