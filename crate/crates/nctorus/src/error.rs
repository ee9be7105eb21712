//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NcError {
    #[error("mismatched algebra contexts: {0}")]
    ContextMismatch(String),

    #[error("invalid direction index {0} (must be 1 or 2)")]
    BadDirection(u8),

    #[error("element is not self-adjoint (defect {0:.3e})")]
    NotSelfAdjoint(f64),

    #[error("series did not converge within band cap: {0}")]
    SeriesDiverged(String),

    #[error("eigensolver failure: zheevd info = {0}")]
    Eigensolver(i32),

    #[error("derivative of generator tag outside the closed set: {0}")]
    TagDerivative(String),

    #[error("non-integrable radial word: r-power {r_power}, B0 count {b0_count}")]
    NonIntegrable { r_power: i32, b0_count: i32 },

    #[error("quadrature did not converge: estimated error {est:.3e} > {tol:.3e}")]
    QuadratureDiverged { est: f64, tol: f64 },

    #[error("golden multiset mismatch: {0}")]
    GoldenMismatch(String),

    #[error("kernel-threshold ambiguity: gap {gap:.3e} between zero and nonzero modes")]
    KernelThreshold { gap: f64 },

    #[error("ill-conditioned heat fit: {0}")]
    IllConditionedFit(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("guard band overflow: estimated restriction loss {0:.3e}")]
    GuardOverflow(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NcError>;
