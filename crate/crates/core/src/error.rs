use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A chart point lies outside the domain of its chart.
    #[error("point outside chart domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A trajectory left the chart atlas (truncated models only).
    #[error("trajectory left the chart atlas at t = {time:.6}")]
    ChartEscape { time: f64 },

    /// Newton shooting for the two-point boundary value problem diverged.
    #[error("shooting did not converge after {iterations} iterations (residual {residual:.3e})")]
    ShootingDiverged { iterations: usize, residual: f64 },

    /// The denominator factor of an explicit Riccati solution is singular.
    #[error("denominator factor singular at t = {t:.6} (conjugate point)")]
    SingularDenominator { t: f64 },

    /// Argument outside the domain of the cot threshold branch.
    #[error("lambda = {lambda:.6} is outside the cot domain (requires lambda < pi)")]
    CotDomain { lambda: f64 },

    /// Too many pairwise cost evaluations failed for the transform to be trusted.
    #[error("cost oracle unreliable: {failures} of {total} pair evaluations failed")]
    OracleUnreliable { failures: usize, total: usize },

    /// Characteristics crossed at the sampled resolution.
    #[error("characteristics cross at the sampled resolution: {0}")]
    NonDiffeomorphism(String),

    /// A propagated frame grew beyond the stability cutoff.
    #[error("frame propagation unstable: norm exceeded {0:.3e}")]
    Unstable(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
