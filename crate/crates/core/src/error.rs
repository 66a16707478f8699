use thiserror::Error;

/// Errors surfaced by solvers, geometry primitives and I/O plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A solver iterate went non-finite. Carries the offending agent and step.
    #[error("solver diverged at iteration {iteration}, agent {agent} ({detail})")]
    Diverged {
        iteration: usize,
        agent: usize,
        detail: String,
    },

    #[error("graph is not connected")]
    Disconnected,

    /// Target algebraic connectivity could not be met within the attempt budget.
    #[error("graph search failed: best lambda2 {best_lambda2} for target {target}")]
    GraphSearchFailed {
        target: f64,
        best_lambda2: f64,
        /// Closest graph found, usable as a best-effort fallback.
        best_edges: Vec<(usize, usize)>,
        nodes: usize,
    },

    /// Constraint image is not in the cone interior (r_tilde <= 0).
    #[error("not a Slater point: interior margin {0}")]
    NotSlater(f64),

    /// A certificate re-verification found a mismatch or a violated bound.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn dim(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }
}
