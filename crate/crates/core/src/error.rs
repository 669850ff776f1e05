use thiserror::Error;

/// Errors produced by scenario validation and the exact-analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scenario invariant does not hold. `field` names the offending
    /// entity and index, e.g. `users[3].p`.
    #[error("invalid scenario: {field}: {reason}")]
    Validation { field: String, reason: String },

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index (user, channel or location) is out of range.
    #[error("{kind} index {index} out of range (size {size})")]
    Index {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    /// An exhaustive search would visit more states than allowed.
    #[error("search space of {required} states exceeds the budget of {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("failed to parse scenario: {0}")]
    Parse(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
