use std::path::PathBuf;

/// Errors raised by the channel model, the optimizers and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix expected to be Hermitian positive definite failed its factorization.
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    /// A linear system could not be solved.
    #[error("singular matrix ({0})")]
    Singular(&'static str),

    /// Bisection on a Lagrange multiplier could not bracket the power target.
    #[error("bisection failed to bracket power target {target:.6e} W (power at lower end {low:.6e}, upper end {high:.6e})")]
    Bracket { target: f64, low: f64, high: f64 },

    /// A configuration value violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A component failed inside a Monte Carlo trial.
    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
