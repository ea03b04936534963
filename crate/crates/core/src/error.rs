use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested computation exceeds a configured size or time budget.
    #[error("budget exceeded: {what} ({requested} > {limit})")]
    Budget {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    /// Inputs that should agree with each other do not.
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn budget(what: &'static str, requested: impl Into<u128>, limit: impl Into<u128>) -> Error {
    Error::Budget {
        what,
        requested: requested.into(),
        limit: limit.into(),
    }
}
