use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by assembly, solvers and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A structural hypothesis (H(m), H(a), H(B), ...) does not hold for the data.
    #[error("hypothesis {hypothesis} violated: {detail}")]
    Hypothesis {
        hypothesis: &'static str,
        detail: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// ε = 0 requested while B has a nontrivial kernel.
    #[error("degenerate operator: {0}")]
    Degenerate(String),

    #[error("factorization failed at pivot {pivot} (value {value:e}, largest diagonal {max_diag:e})")]
    Factorization {
        pivot: usize,
        value: f64,
        max_diag: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn hypothesis(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Io { .. }
            | Error::Argument(_)
            | Error::Dimension { .. }
            | Error::Degenerate(_) => 2,
            Error::Hypothesis { .. } => 3,
            Error::NonConvergence { .. } | Error::Factorization { .. } => 4,
        }
    }
}
