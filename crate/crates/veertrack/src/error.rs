use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A tie or zero that the constructions refuse to break: axis-parallel
    /// edges, equal lengths in the Delaunay certificate, simultaneous events.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid surface: {0}")]
    Semantic(String),
    #[error("edge {0} cannot be flipped")]
    NotFlippable(String),
    #[error("unknown edge label {0}")]
    UnknownEdge(String),
    #[error("point lies on the boundary of the cone")]
    Boundary,
    #[error("point lies outside the cone")]
    OutsideCone,
    #[error("inconsistent data: {0}")]
    Inconsistent(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
