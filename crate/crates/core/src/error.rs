use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A modelling assumption is violated; `assumption` is one of "A0".."A3".
    #[error("({assumption}) violated: {message}")]
    Assumption {
        assumption: &'static str,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no convergence after {iterations} iterations (res_alpha = {res_alpha:e}, res_u = {res_u:e}, tolerance = {tolerance:e})")]
    Convergence {
        iterations: usize,
        res_alpha: f64,
        res_u: f64,
        tolerance: f64,
    },

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("maximum principle violated: u = {value:e} at node {node} (allowed [{lower:e}, {upper:e}])")]
    MaximumPrinciple {
        value: f64,
        node: usize,
        lower: f64,
        upper: f64,
    },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Strips any `Step` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            e => e,
        }
    }
}
