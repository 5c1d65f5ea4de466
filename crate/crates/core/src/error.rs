//! Error types shared across the library.

use thiserror::Error;

/// Errors raised by the trace-structure core.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    /// A symbol name that is not a valid identifier.
    #[error("invalid symbol name {0:?}: expected [A-Za-z][A-Za-z0-9_]*")]
    InvalidSymbol(String),

    /// Enumeration was requested past the configured length bound.
    #[error("enumeration length {requested} exceeds the bound {bound}")]
    BoundExceeded { requested: usize, bound: usize },

    /// Enumeration produced more traces than the caller allowed.
    #[error("enumeration exceeded the cap of {cap} traces")]
    TooManyTraces { cap: usize },

    /// An acceptor whose transitions or trace set use symbols outside the
    /// declared alphabet.
    #[error("symbol {0:?} is not in the declared alphabet")]
    SymbolOutsideAlphabet(String),

    /// A serialized acceptor that is not a well-formed deterministic machine.
    #[error("malformed acceptor: {0}")]
    Malformed(String),

    /// A structure used where a circuit specification is required
    /// (disjoint alphabets, non-empty, prefix-closed).
    #[error("not a circuit specification: {0}")]
    NotCircuitSpec(String),

    /// A renaming that is not injective on the structure's alphabet.
    #[error("renaming is not injective: {0:?} and {1:?} both map to {2:?}")]
    NonInjectiveRenaming(String, String, String),

    /// A port list that does not fit the requested primitive.
    #[error("invalid ports: {0}")]
    InvalidPorts(String),

    /// A specification expression that could not be parsed.
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse {
        message: String,
        line: usize,
        col: usize,
    },

    /// A symbol used with both direction marks inside one sequential or
    /// alternative composition; only parallel composition joins a producer
    /// with its consumer.
    #[error("symbol {0:?} is marked both as input and as output in one sequential context")]
    DirectionConflict(String),

    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),

    #[error("no value for variable {0:?}")]
    MissingVariable(String),

    #[error("too many gate inputs for an exhaustive check: {count} (limit {limit})")]
    TooManyInputs { count: usize, limit: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("malformed network: {0}")]
    MalformedNetwork(String),

    #[error("delay must be strictly positive: {0}")]
    NonPositiveDelay(String),

    #[error("trace does not fit this network: {0}")]
    NetworkMismatch(String),

    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),

    #[error("unknown point: {0}")]
    UnknownPoint(String),

    #[error("unresolvable constraint: {0}")]
    UnresolvableConstraint(String),
}
