use alloc::string::String;
use core::fmt;

/// Errors produced by code construction, decoding and compression routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input had the wrong size or violated a precondition.
    InvalidInput(String),
    /// A configuration is inconsistent (e.g. non-power-of-two section size
    /// for a Hadamard design, or a block count that does not divide `L`).
    Config(String),
    /// An iterative decoder produced a non-finite value.
    Divergence { iteration: usize },
    /// An exhaustive search would exceed its codeword budget.
    BudgetExceeded { needed: u128, budget: u128 },
    /// No feasible solution exists (e.g. the MAC bracket search).
    Infeasible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Divergence { iteration } => {
                write!(f, "non-finite value at decoder iteration {iteration}")
            }
            Error::BudgetExceeded { needed, budget } => {
                write!(f, "search space of {needed} codewords exceeds budget {budget}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
