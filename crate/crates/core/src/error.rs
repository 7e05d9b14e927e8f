use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid reservoir spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("circulant input matrix singular after {0} resamples")]
    SingularInput(usize),

    #[error("federated training did not converge in {rounds} rounds (max |r| = {primal:.3e}, |s| = {dual:.3e})")]
    NotConverged { rounds: usize, primal: f64, dual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("{phase} phase failed (seed {seed}): {source}")]
    Phase {
        phase: &'static str,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("bad weight blob: {0}")]
    Blob(String),
}

impl Error {
    pub(crate) fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, unwrapping phase context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
