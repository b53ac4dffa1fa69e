use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The saddle solver hit its iteration cap. Carries the last iterate.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        p: Vec<f64>,
        p_b: Vec<f64>,
    },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("{0}")]
    Io(String),

    /// Failure at one sweep point.
    #[error("scenario {scenario}, psi {psi}, ratio {ratio}: {source}")]
    Point {
        scenario: String,
        psi: f64,
        ratio: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {index}: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// True if this error (or the error it wraps) is a solver convergence failure.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::Convergence { .. } => true,
            Error::Trial { source, .. } | Error::Point { source, .. } => source.is_convergence(),
            _ => false,
        }
    }
}
