use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed shapes, missing coordinates, unknown names.
    #[error("structural error: {0}")]
    Structural(String),
    /// An operation was called outside its precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// Bad user-facing input (values out of range, disconnected graphs, ...).
    #[error("input error: {0}")]
    Input(String),
    /// Text input that failed to parse, with a 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// A flow problem with no feasible solution.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Instance outside the supported combinatorial budget.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
