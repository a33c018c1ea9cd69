use thiserror::Error;

/// Errors raised by the sketching engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),
    /// A factorization or solve broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A runtime invariant of the algorithm was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
