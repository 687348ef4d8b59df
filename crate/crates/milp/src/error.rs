use thiserror::Error;

use crate::Solution;

#[derive(Debug, Error)]
pub enum SolverError {
    /// The program itself is malformed (dangling index, non-finite data).
    #[error("malformed program: {0}")]
    Structural(String),

    /// Branch-and-bound exceeded its node budget. The best integer solution
    /// found so far, if any, is attached.
    #[error("node limit of {limit} exceeded")]
    NodeLimit {
        limit: u64,
        incumbent: Option<Box<Solution>>,
    },

    #[error("{count} free binaries exceed the enumeration limit of {limit}")]
    TooManyBinaries { count: usize, limit: usize },

    #[error("simplex exceeded {0} iterations")]
    IterationLimit(u64),
}
