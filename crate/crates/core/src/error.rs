use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial {index} is outside the episode (1..={total})")]
    TrialOutOfRange { index: usize, total: usize },

    #[error("target rule (dimension {dimension}, value {value}) is not valid for trial {trial}")]
    InvalidRule {
        dimension: usize,
        value: usize,
        trial: usize,
    },

    #[error("instance occurrence at time {occurrence} is not before query time {query}")]
    OccurrenceNotBeforeQuery { occurrence: usize, query: usize },

    #[error("instance memory is empty")]
    EmptyMemory,

    #[error("inconsistent feedback: {0}")]
    Inconsistent(String),

    #[error("condition {condition}: {source}")]
    Condition {
        condition: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results file {path}: {message}")]
    Results { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
