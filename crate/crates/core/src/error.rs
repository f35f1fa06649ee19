use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("n={n} and h={h} must have the same parity with |h| <= n")]
    Parity { n: usize, h: i32 },

    #[error("degenerate dimensions: k={k}, n={n} (both must be >= 1)")]
    Degenerate { k: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cap exceeded: {what} reached {count} (cap {cap})")]
    CapExceeded {
        what: &'static str,
        count: usize,
        cap: usize,
    },

    #[error("numerical failure: {what} (residual {residual:e})")]
    Numerical { what: &'static str, residual: f64 },
}
