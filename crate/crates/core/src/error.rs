use std::path::PathBuf;

use crate::trace::ScoreTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("degenerate feature: {0} has zero norm")]
    DegenerateFeature(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The objective became NaN or infinite mid-run. The trace holds every
    /// row logged up to and including the failing evaluation.
    #[error("optimization aborted at iteration {iteration}: non-finite {what}")]
    Diverged {
        iteration: usize,
        what: &'static str,
        trace: Box<ScoreTrace>,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("malformed PPM file {path}: {reason}")]
    Ppm { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn mismatch(
        context: &'static str,
        expected: impl std::fmt::Display,
        got: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
