use thiserror::Error;

use crate::schemes::StepDiagnostics;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// State outside the domain of the entropy (`S(y) = -inf`).
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("finite-difference stencil around sample {index} leaves the domain")]
    StencilOutsideDomain { index: usize },

    #[error("model provides no analytic Poisson derivative")]
    MissingAnalyticDerivative,

    /// Reduced temperature `f(p)` is not positive at the requested momentum.
    #[error("momentum {p} lies outside the feasible interval (f(p) = {f})")]
    OutOfDomain { p: f64, f: f64 },

    #[error("Newton solver failed after {iterations} iterations")]
    SolverFailure {
        iterations: usize,
        diagnostics: Box<StepDiagnostics>,
    },

    #[error("negative discriminant {0} in the implicit Euler temperature equation")]
    NegativeDiscriminant(f64),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("horizon mismatch: trajectory ends at {trajectory}, reference at {reference}")]
    HorizonMismatch { trajectory: f64, reference: f64 },

    #[error("reference integration failed at t = {t}: {reason}")]
    ReferenceFailure { t: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
