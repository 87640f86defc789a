//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by constraint, game, and strategy operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An assignment was queried on a variable it does not define.
    #[error("missing variable {0}")]
    MissingVariable(usize),
    /// Two objects over different alphabets were combined.
    #[error("alphabet mismatch: expected k = {expected}, found k = {found}")]
    AlphabetMismatch { expected: u8, found: u8 },
    /// A negated target or negation set was used with k != 2.
    #[error("negation requires a boolean alphabet, found k = {0}")]
    NegationOnNonBoolean(u8),
    /// A constraint, map, or system violates a structural invariant.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An operation produced a constraint with no accepted tuples.
    #[error("empty constraint: {0}")]
    EmptyConstraint(String),
    /// Exhaustive search would exceed the configured bound.
    #[error("search bound exceeded: {needed} candidates needed, bound is {bound}")]
    SearchBoundExceeded { needed: u128, bound: u128 },
    /// An operation was called outside its documented precondition.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    /// A postcondition check failed; this signals a bug or a false claim.
    #[error("postcondition failed: {0}")]
    PostconditionFailed(String),
    /// Input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
