use thiserror::Error;

/// Errors raised by the estimator, the generative model and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("angles {0} and {1} (radians) coincide; steering matrix would be rank deficient")]
    DegenerateAngles(f64, f64),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("noise-only sample covariance is singular (eigenvalue ratio {ratio:.3e})")]
    SingularNoiseCovariance { ratio: f64 },

    #[error("steering matrix is rank deficient after whitening")]
    RankDeficientSteering,

    #[error("numerical blow-up: {0}")]
    NumericalBlowup(&'static str),

    #[error("estimator did not converge within {sweeps} sweeps at level {level}")]
    MaxSweepsExceeded { level: usize, sweeps: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
