use thiserror::Error;

use crate::golazo::GlassoSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("covariates are rank deficient; collinear columns: {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("column {column} is constant")]
    ConstantColumn { column: String },

    #[error("solver did not converge after {sweeps} sweeps (last max change {gap:.3e})")]
    NotConverged {
        sweeps: usize,
        gap: f64,
        last: Box<GlassoSolution>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("{message} (mean R-hat {mean_rhat:.4})")]
    Diagnostics {
        message: String,
        mean_rhat: f64,
        rhat: Vec<f64>,
        ess: Vec<f64>,
    },
}

impl Error {
    /// Whether the failure came from bad inputs rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::RankDeficient { .. } | Error::ConstantColumn { .. }
        )
    }
}
