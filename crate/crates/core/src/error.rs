use thiserror::Error;

/// Errors produced anywhere in the test pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distribution `{0}` has no continuous inverse")]
    NonInvertible(&'static str),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("expectation budget of {budget} nodes cannot reach tolerance {tolerance:e} (achieved {achieved:e})")]
    BudgetTooSmall {
        budget: usize,
        tolerance: f64,
        achieved: f64,
    },

    #[error("AR coefficients are not stationary: largest root modulus {max_modulus}")]
    NotStationary { max_modulus: f64 },

    #[error("lag design matrix is singular (condition number {condition:e})")]
    SingularDesign { condition: f64 },

    #[error("empirical distribution function of an empty sample")]
    EmptySample,

    #[error("alternative H fails the symmetry self-test (max defect {defect:e})")]
    AsymmetricH { defect: f64 },

    #[error("invalid cell partition: {0}")]
    InvalidPartition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
