use thiserror::Error;

/// Errors shared across the toolkit. Precision failures and budget
/// exhaustion are loud by design: a query that would need unknown series
/// digits never guesses.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("residue root is not simple: {0}")]
    NotSimpleRoot(String),
    #[error("operation unsupported in current residue mode: {0}")]
    ModeUnsupported(String),
    #[error("case-split budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("unsupported degree in quantified variable: {0}")]
    DegreeUnsupported(String),
    #[error("polynomial degree exceeds backend cap: {0}")]
    DegreeCapExceeded(String),
    #[error("variable occurs nonlinearly: {0}")]
    NonlinearOccurrence(String),
    #[error("congruence atom not meaningful in divisible mode")]
    CongruenceAtomInDivisibleMode,
    #[error("input is not parameter-free: {0}")]
    NonParameterFreeInput(String),
    #[error("canonicalization failed: {0}")]
    CanonicalizationFailed(String),
    #[error("sort error: {0}")]
    SortError(String),
    #[error("syntax error at {line}:{col}: {msg}")]
    SyntaxError { line: usize, col: usize, msg: String },
    #[error("evaluation error: {0}")]
    EvalError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
