use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("moment match failed: {0}")]
    Fit(String),
    /// A violated problem constraint, named as in the optimization problem
    /// (C1..C7) or by the parameter it concerns.
    #[error("constraint {constraint} violated: {message}")]
    Constraint { constraint: &'static str, message: String },
    #[error("invalid variant: {0}")]
    Variant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
