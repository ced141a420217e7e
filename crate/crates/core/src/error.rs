use crate::solver::ConvergenceHistory;

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum SpodError {
    /// An argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector dimensions are inconsistent.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A numerical routine (e.g. the SVD backend) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An input violates a documented contract (e.g. an unsorted spectrum).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The solver produced non-finite values. The history collected up to
    /// the last valid iterate is preserved.
    #[error("solver diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        history: Box<ConvergenceHistory>,
    },
}

pub type Result<T> = std::result::Result<T, SpodError>;
