use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Learner(#[from] bregmantron::Error),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad dataset selector {selector:?}: {reason}")]
    Selector { selector: String, reason: String },

    #[error("invalid experiment: {0}")]
    Spec(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// Context for an error raised while running one experiment.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    pub fn context(self, context: impl Into<String>) -> Self {
        HarnessError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable tag for the error JSON the CLI prints.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Learner(_) => "learner",
            HarnessError::Read { .. } => "read",
            HarnessError::Write { .. } => "write",
            HarnessError::Selector { .. } => "selector",
            HarnessError::Spec(_) => "spec",
            HarnessError::Json(_) => "json",
            HarnessError::Csv(_) => "csv",
            HarnessError::Context { source, .. } => source.kind(),
        }
    }
}
