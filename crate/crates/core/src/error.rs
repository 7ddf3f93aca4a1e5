use thiserror::Error;

/// Errors produced by the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("grid mismatch: expected {expected} time samples, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("node count mismatch: expected {expected} samples, got {got}")]
    NodeCountMismatch { expected: usize, got: usize },

    #[error("relaxation solve failed for lambda index {index} (lambda = {lambda}): {reason}")]
    Relaxation {
        index: usize,
        lambda: f64,
        reason: String,
    },

    #[error("non-finite value {value} produced by the nonlinearity at collocation node {node} (x = {position:?})")]
    NonFinite {
        node: usize,
        position: Vec<f64>,
        value: f64,
    },

    #[error("Picard iteration did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        residuals: Vec<f64>,
        partial: Box<crate::mild::MildSolution>,
    },

    #[error("no admissible ball radius: {0}")]
    RadiusSelection(String),

    #[error("|(g, kappa)| = {pairing:e} is below the floor {floor:e}")]
    PairingTooSmall { pairing: f64, floor: f64 },

    #[error("memory kernel rejected by the derivative-integrability gate: {0}")]
    KernelGateFailed(String),

    #[error("inconsistent measurement: {0}")]
    Measurement(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("ill-conditioned first-kind system: {0}")]
    IllConditioned(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
