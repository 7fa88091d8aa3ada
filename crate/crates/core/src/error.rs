use thiserror::Error;

/// Errors raised by sketch construction, updates, queries and decoding.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SketchError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("nothing to compact")]
    NothingToCompact,
    #[error("sketch is empty")]
    Empty,
    #[error("quantile fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("queries must be sorted ascending")]
    UnsortedQueries,
    #[error("weight must be at least 1")]
    ZeroWeight,
    #[error("total weight overflows 64 bits")]
    WeightOverflow,
    #[error("sampler rate may only grow (current 2^{current}, requested 2^{requested})")]
    RateMayOnlyGrow { current: u32, requested: u32 },
    #[error("weight {weight} needs a taller sketch: grow first (k * 2^H = {limit})")]
    GrowFirst { weight: u64, limit: u128 },
    #[error("incompatible sketches: {field} differs ({left} vs {right})")]
    Incompatible {
        field: &'static str,
        left: String,
        right: String,
    },
    #[error("corrupt sketch bytes: {0}")]
    Corrupt(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SketchError {
    fn from(e: std::io::Error) -> Self {
        SketchError::Io(e.to_string())
    }
}

pub type Result<T, E = SketchError> = std::result::Result<T, E>;
