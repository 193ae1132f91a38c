use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Budget refusals always carry the amount of work that would have been
/// needed, so callers can decide whether to raise the limit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported prime {0}: p must be a prime in 2..=13")]
    UnsupportedPrime(u32),

    #[error("{what}: requires {required} units of work, budget is {limit}{hint}")]
    BudgetExceeded {
        what: String,
        required: u128,
        limit: u64,
        hint: String,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("modulus mismatch: expected p = {expected}, got p = {found}")]
    ModulusMismatch { expected: u32, found: u32 },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported nonzero shift {0}: tables must vanish at the origin")]
    NonzeroShift(String),

    #[error("unsupported table kind: {0}")]
    UnsupportedKind(String),

    #[error("query cap of {cap} exceeded")]
    QueryCapExceeded { cap: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
