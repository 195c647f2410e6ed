use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Invalid arguments: shapes, index ranges, malformed tuples.
    #[error("domain error: {0}")]
    Domain(String),

    /// A binomial coefficient needed by the computation exceeds the cap.
    #[error("combinatorial cap exceeded: C({n},{k}) = {value} exceeds cap {cap}")]
    CapExceeded {
        n: usize,
        k: usize,
        /// Decimal value, or "overflow" when it does not fit in 128 bits.
        value: String,
        cap: u64,
    },

    /// An implication that must hold between checkers was violated.
    #[error("internal consistency violation: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
