use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("base chain is not ergodic: {0}")]
    NonErgodicChain(String),

    #[error("enumeration of {requested} items exceeds the budget of {cap}; switch to sampling")]
    BudgetExceeded { requested: f64, cap: u64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("word of length {len} is too short; need at least {needed}")]
    WordTooShort { len: usize, needed: usize },

    #[error("singular matrix product encountered: {0}")]
    SingularMatrix(String),

    #[error("fiber over the given base word is empty")]
    EmptyFiber,

    #[error("sample count must be at least 1, got {0}")]
    InvalidSampleCount(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("pressure does not change sign on [0, {t_max}]: P(0) = {p_low}, P(t_max) = {p_high}")]
    NoBracket { t_max: f64, p_low: f64, p_high: f64 },

    #[error("pressure is not monotone in t: P({t1}) = {p1} < P({t2}) = {p2}")]
    NonMonotone { t1: f64, p1: f64, t2: f64, p2: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
