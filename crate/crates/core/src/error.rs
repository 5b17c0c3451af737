use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed arguments that violate an operation's preconditions
    /// (shape mismatches, out-of-range labels, bad probabilities).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was used outside its contract, e.g. a backward pass
    /// requested for a forward pass that ran in inference mode.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A dataset CSV row could not be parsed. `row` is 1-based and counts
    /// data rows only (the header is row 0).
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    /// A cascade description failed to load or validate. `path` names the
    /// offending element, e.g. `stages[3]/weakClassifiers[7]/internalNodes`.
    #[error("cascade {path}: {message}")]
    Cascade { path: String, message: String },

    /// A weights file is malformed or does not match the model it is loaded into.
    #[error("weights: {0}")]
    Weights(String),

    #[error("image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
