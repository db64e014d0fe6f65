use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad or missing configuration: column names, schema keys, empty training data.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("row error at line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("feature error for {entity}: {message}")]
    Feature { entity: String, message: String },

    #[error("leakage error: {0}")]
    Leakage(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("no prediction available for entity {entity} at week {week}")]
    Prediction { entity: String, week: u32 },

    #[error("metric error: {0}")]
    Metric(String),

    /// A tool was invoked in a state its contract forbids. Indicates a runner bug.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("policy failure: {0}")]
    Policy(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input (configuration or data rows)
    /// rather than a failure while running.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Argument(_) | Error::Row { .. } | Error::Leakage(_) | Error::File { .. }
        )
    }
}
