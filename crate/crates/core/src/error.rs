use std::path::PathBuf;

/// Errors surfaced by the simulator and its oracles.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The sampler kept producing near-singular matrices.
    #[error("channel sampling rejected {0} consecutive draws as singular")]
    SamplingExhausted(usize),

    /// A matrix that must be inverted is singular to working precision.
    #[error("matrix is numerically singular (condition number {0:.3e})")]
    Singular(f64),

    /// A probability-zero channel event; the caller resamples the trial.
    #[error("degenerate channel: {0}")]
    Degenerate(String),

    /// Exhaustive ML search would visit more candidates than allowed.
    #[error("candidate set of size {size} exceeds limit {limit}")]
    CandidateOverflow { size: f64, limit: u64 },

    /// Inconsistent or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough error events to fit a slope.
    #[error("insufficient statistics: {0}")]
    Insufficient(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
