use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("inverse update is singular (denominator {denominator:e})")]
    SingularUpdate { denominator: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no candidate coordinates left to add")]
    NoCandidates,

    #[error("support is empty")]
    EmptySupport,

    #[error("iterate left the positive definite cone: {0}")]
    Diverged(String),

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("feature column is identically zero")]
    ZeroColumn,

    #[error("least-squares design is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },

    #[error("dimension {p} exceeds the dense limit {limit}")]
    DimensionTooLarge { p: usize, limit: usize },

    #[error("{subsets} subsets exceeds the enumeration limit {limit}")]
    CombinatorialBlowup { subsets: u128, limit: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numbers rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::SingularUpdate { .. }
                | Error::Diverged(_)
                | Error::NonConvergence { .. }
                | Error::RankDeficient { .. }
        )
    }
}
