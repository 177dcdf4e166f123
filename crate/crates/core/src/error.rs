use thiserror::Error;

use crate::qp::KktResiduals;

/// Errors raised while building problems or running solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("power iteration did not converge within {iterations} iterations (last estimate {last_estimate})")]
    SpectralNormNotConverged { iterations: usize, last_estimate: f64 },

    #[error("step-size rule degenerate: beta + 2 delta + ell |A|^2 (2 lambda_bar + 1) + 2 mu_bar = 0")]
    DegenerateStep,

    #[error("initial point is not in the constraint set")]
    InfeasibleStart,

    #[error("prox oracle failed at iteration {iteration}: {source}")]
    Prox {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("empty polyhedron")]
    EmptyPolyhedron,

    #[error("polyhedron possibly infeasible: best residuals {residuals:?}")]
    PossiblyInfeasible { residuals: KktResiduals },

    #[error("projection hit the iteration cap ({iterations}) before tolerance: best residuals {residuals:?}")]
    ProjectionNotConverged {
        iterations: usize,
        residuals: KktResiduals,
    },

    #[error("failed to load network data: {0}")]
    NetworkLoad(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
