use std::path::PathBuf;

/// Errors raised by fields, solvers, the step controller, the feature
/// blending operators and the study harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} lies outside the integration domain [0, 1]")]
    Domain { t: f64 },

    #[error("no step history available; the first step must be an RK2 initialization step")]
    MissingHistory,

    #[error("field `{0}` has no closed-form solution")]
    UnsupportedField(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient points for a log-log fit: need at least 3 with error > 1e-14, got {0}")]
    InsufficientPoints(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
