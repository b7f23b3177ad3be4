use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("fold: 1 + f' = {value:.3e} at node {node}, map is not injective")]
    Fold { node: usize, value: f64 },

    #[error("marginal mismatch: source mass {source_mass}, target mass {target_mass}")]
    Marginal { source_mass: f64, target_mass: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimization failure after {iterations} iterations (residual {residual:.3e}): {reason}")]
    OptimizationFailure {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("time step too large: energy rose by {increase:.3e} at t = {time:.3e}")]
    DtTooLarge { time: f64, increase: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDensity(_)
                | Error::Fold { .. }
                | Error::Domain(_)
                | Error::OptimizationFailure { .. }
                | Error::DtTooLarge { .. }
                | Error::Resolution(_)
                | Error::Marginal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
