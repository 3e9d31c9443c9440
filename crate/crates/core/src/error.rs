//! Crate-wide error type.
//!
//! One enum covers the whole library so that results compose across
//! modules; callers that need to branch (e.g. the CLI mapping errors to
//! exit codes) match on the variant.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Two operator strings of different qubit counts were combined.
    #[error("qubit count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A Pauli string must act on at least one qubit.
    #[error("empty Pauli string")]
    EmptyString,

    /// Text that is not a valid Pauli string ("I", "X", "Y", "Z" per qubit).
    #[error("invalid Pauli string {text:?}: {reason}")]
    ParsePauli { text: String, reason: &'static str },

    /// A numeric parameter was outside its documented domain.
    #[error("invalid parameter {name} = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A weight table failed validation (negative entry, bad key, ...).
    #[error("invalid noise table: {0}")]
    InvalidTable(String),

    /// Weights that should form a probability distribution do not.
    #[error("weights sum to {sum}, which deviates from 1 by more than {tolerance}")]
    NotNormalized { sum: f64, tolerance: f64 },

    /// The same key appeared twice in an input table.
    #[error("duplicate entry for {key:?}")]
    DuplicateKey { key: String },

    /// A recovery strategy does not cover or match the measurement record.
    #[error("strategy mismatch: {0}")]
    StrategyMismatch(String),

    /// The request would exceed a configured size cap.
    #[error("{what} needs n = {n} qubits but the cap is {cap}")]
    ResourceCap {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    /// A Kraus family that should resolve the identity does not.
    #[error("Kraus family not complete: squared amplitudes sum to {sum}")]
    IncompleteKraus { sum: f64 },

    /// Two independent computations of the same quantity disagree.
    #[error("cross-check failed: {0}")]
    ConsistencyFault(String),

    /// A dense matrix failed a state invariant (Hermiticity, trace, positivity).
    #[error("invalid dense state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, Error>;
