use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("span members have inconsistent shapes: expected {expected:?}, got {found:?}")]
    InhomogeneousSpan {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("quotient is not defined: {0} member(s) of the small span lie outside the big span")]
    NotContained(usize),
    #[error("invalid truncation level {level}: {reason}")]
    InvalidLevel { level: usize, reason: String },
    #[error("truncation family `{symbol}` is not coherent between levels {lower} and {upper}")]
    IncoherentFamily {
        symbol: String,
        lower: usize,
        upper: usize,
    },
    #[error("budget exceeds truncation: {0}")]
    BudgetExceedsTruncation(String),
    #[error("sign convention: {0}")]
    SignConvention(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("word enumeration would produce {count} words (limit {limit})")]
    WordBlowup { count: u128, limit: u128 },
    #[error("junk kernel unstable; increase levels ({0})")]
    JunkKernelUnstable(String),
    #[error("insufficient truncation for schedule: {0}")]
    InsufficientTruncation(String),
    #[error("schedule too coarse: {0}")]
    ScheduleTooCoarse(String),
    #[error("budget mismatch: {0}")]
    BudgetMismatch(String),
    #[error("functional evaluation inconsistent: {0}")]
    FunctionalInconsistent(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
