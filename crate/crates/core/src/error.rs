use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A link could not be built from the supplied breakpoints.
    #[error("invalid link at breakpoint {index}: {reason}")]
    Construction { index: usize, reason: String },

    /// The chain constraint set is empty.
    #[error("infeasible chain constraints between positions {lo} and {hi}: {reason}")]
    Infeasible { lo: usize, hi: usize, reason: String },

    #[error("solver did not converge after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    #[error("malformed IDX data at byte offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("training failed at iteration {iteration}: {source}")]
    Training {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Training {
            iteration,
            source: Box::new(self),
        }
    }
}
