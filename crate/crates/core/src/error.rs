use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is within {distance:.3e} of the chart pole; rotate before projecting")]
    PoleSingularity { distance: f64 },

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("projection residual {residual:.3e} exceeds tolerance {tolerance:.3e}; increase the truncation degree")]
    TruncationLoss { residual: f64, tolerance: f64 },

    #[error("basis of dimension {dimension} on {nodes} nodes exceeds the memory budget of {budget} entries")]
    BudgetExceeded {
        dimension: usize,
        nodes: usize,
        budget: usize,
    },

    #[error("conformal factor is not positive on the grid (min {min:.3e})")]
    NonPositiveFactor { min: f64 },

    #[error("denominator {0:.3e} is degenerate")]
    DegenerateDenominator(f64),

    #[error("positivity lost at t = {t}: min u = {min_u:.3e} with dt = {dt:.3e}")]
    PositivityLoss { t: f64, min_u: f64, dt: f64 },

    #[error("step rejected at t = {t}: E_f rose by {increase:.3e} with dt = {dt:.3e}")]
    StepRejected { t: f64, increase: f64, dt: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "quadrature did not converge: error estimate {error:.3e} above tolerance {tolerance:.3e}"
    )]
    NonConvergentQuadrature { error: f64, tolerance: f64 },

    #[error("Morse index {index} outside [0, {max}]")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("minimum of f must be positive, got {0}")]
    NonPositiveMin(f64),

    #[error("initial energy E_f = {energy:.6e} exceeds the threshold beta = {beta:.6e}")]
    BetaGate { energy: f64, beta: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
