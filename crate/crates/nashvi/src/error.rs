//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An index (state, agent, action, joint action) is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// An argument violates a mathematical precondition (shape mismatch,
    /// parameter outside its admissible range, zero probability, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration (game file or solver settings) is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed (singular solve, blown residual).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Monte-Carlo estimation hit an invalid state (zero-probability action).
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
