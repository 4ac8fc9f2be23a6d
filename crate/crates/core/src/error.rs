use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error(
        "Newton solver did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("positivity lost: damping reached {damping:e} with negative density or temperature")]
    PositivityLost { damping: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the per-step nonlinear solve.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::PositivityLost { .. }
                | Error::LinearSolver(_)
                | Error::Positivity(_)
        )
    }
}
