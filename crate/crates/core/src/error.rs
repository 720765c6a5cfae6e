use alloc::string::String;
use alloc::vec::Vec;

/// Everything that can go wrong in the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unbalanced panel: {} missing (unit, time) cells, first {:?}", missing.len(), missing.first())]
    Balance { missing: Vec<(String, i64)> },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("duplicate observation for unit {unit} at time {time}")]
    Duplicate { unit: String, time: i64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty comparator pool for unit {unit}")]
    EmptyPool { unit: String },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("unit {unit} has too few pre-treatment periods for this rule")]
    InsufficientPrePeriods { unit: String },

    #[error("invalid coarsening strategy: {0}")]
    Strategy(String),

    #[error("degenerate subset: {0}")]
    DegenerateSubset(String),

    #[error("unknown unit {0}")]
    UnknownUnit(String),

    #[error("unknown covariate column {0}")]
    UnknownColumn(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{failed} of {reps} replications failed, above the 1% limit")]
    TooManyFailures { failed: usize, reps: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
