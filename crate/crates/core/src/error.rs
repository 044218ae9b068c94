use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed URL `{url}`: {reason}")]
    MalformedUrl { url: String, reason: String },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate vector: zero Euclidean norm")]
    DegenerateVector,

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("no page survived ingestion")]
    EmptySeries,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 = invalid configuration or arguments, 3 = data error, 4 = non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Schema(_) => 2,
            Error::NonConvergence { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
