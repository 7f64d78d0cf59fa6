use thiserror::Error;

/// Errors produced by model construction, inference, and learning.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, layouts, or index ranges do not line up.
    #[error("structural error: {0}")]
    Structure(String),

    /// A computation produced non-finite values.
    #[error("numerical failure at iteration {iteration}: {detail}")]
    Numerical {
        iteration: usize,
        detail: String,
        /// Objective / residual history up to the failure, for diagnosis.
        trace: Vec<f64>,
    },

    /// Malformed textual or binary input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
