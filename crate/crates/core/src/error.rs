use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("seminar event references unknown department `{0}`")]
    UnknownDepartment(String),

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("exclusion restriction violated: {0}")]
    ExclusionRestriction(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("outcome has no variation")]
    NoVariation,

    #[error("rank-deficient design in {equation} equation (rank {rank} of {cols})")]
    RankDeficient {
        equation: &'static str,
        rank: usize,
        cols: usize,
    },

    #[error("singular information matrix (condition number {condition:.3e})")]
    SingularHessian { condition: f64 },

    #[error("no start converged ({starts} attempted)")]
    NoConvergence { starts: usize },

    #[error("restricted loglik exceeds unrestricted ({restricted} > {unrestricted})")]
    LoglikOrder { restricted: f64, unrestricted: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularHessian { .. } | Error::NoConvergence { .. } | Error::Numerical(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
