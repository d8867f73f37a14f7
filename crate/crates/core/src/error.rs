use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Structural problems (mismatched dimensions, invalid grids) are separated
/// from numerical failures so callers can map them to different exit paths.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate chart at {coords:?}: Jacobian rank {rank} < {dim}")]
    DegenerateChart {
        coords: Vec<f64>,
        rank: usize,
        dim: usize,
    },

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e}) at {last:?}")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        last: Vec<f64>,
    },

    #[error("iterate left the chart domain at {coords:?}")]
    DomainExit { coords: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error{}: {what}", .time.map(|t| format!(" at t = {t}")).unwrap_or_default())]
    Numeric { what: String, time: Option<f64> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(what: impl Into<String>) -> Self {
        Error::Numeric {
            what: what.into(),
            time: None,
        }
    }

    /// True for the error kinds that indicate bad input rather than a
    /// numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidGrid(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
