use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("allocation length {0} is odd")]
    OddLength(usize),

    #[error("allocation is unbalanced: entries sum to {0}")]
    Unbalanced(i64),

    #[error("allocation entry {index} is {value}, expected +1 or -1")]
    InvalidEntry { index: usize, value: i64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate covariate: all values are equal")]
    DegenerateCovariate,

    #[error("R = {requested} exceeds the capacity of {capacity} mirrored pairs")]
    CapacityExceeded { requested: usize, capacity: u128 },

    #[error(
        "sampler gave up after {attempts} attempts with {achieved} of {requested} distinct allocations"
    )]
    SamplerExhausted {
        attempts: u64,
        achieved: usize,
        requested: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no data: {0}")]
    NoData(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::LengthMismatch { left, right })
    }
}
