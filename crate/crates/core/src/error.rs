use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A request falls outside the available data (e.g. sampling past the
    /// end of a trace).
    #[error("out of range: {0}")]
    Range(String),

    /// A numerical routine could not produce a result (singular system).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("no route from {source_node} to {destination}")]
    NoRoute { source_node: String, destination: String },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Param(msg.into())
}
