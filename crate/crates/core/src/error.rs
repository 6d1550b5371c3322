use thiserror::Error;

use crate::solver::NonConvergenceReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing reference data: sample set for follower {follower} is empty")]
    EmptySamples { follower: usize },

    #[error("sample {index} for follower {follower} is not finite ({value})")]
    NonFiniteSample {
        follower: usize,
        index: usize,
        value: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("{what} = {value:?} lies outside its box {bounds:?}")]
    OutOfBox {
        what: String,
        value: Vec<f64>,
        bounds: Vec<[f64; 2]>,
    },

    #[error("follower {follower} has an empty feasible set at leader strategy {x:?}")]
    EmptyFeasibleSet { follower: usize, x: Vec<f64> },

    #[error(
        "lower-level iteration did not converge at x = {:?} after {} sweeps (last residual {:e})",
        .0.x, .0.sweeps, .0.last_residual()
    )]
    NonConvergence(Box<NonConvergenceReport>),

    #[error("no leader grid point admits a lower-level equilibrium")]
    NoFeasibleLeaderPoint,

    #[error("infeasible point: {0}")]
    InfeasiblePoint(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("malformed game document: {0}")]
    Document(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
