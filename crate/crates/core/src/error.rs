use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget infeasible: {reason} (smallest achieved error {best_error:e})")]
    BudgetInfeasible { reason: String, best_error: f64 },

    #[error("budget overflow: {quantity} has log10 value {log10:.3}")]
    BudgetOverflow { quantity: &'static str, log10: f64 },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged {
        epoch: usize,
        /// Last parameter vector whose loss was finite.
        last_finite: Box<Vec<f64>>,
    },

    #[error("packing infeasible: wanted {wanted} points, achieved {achieved}")]
    PackingInfeasible { wanted: usize, achieved: usize },

    #[error("oracle diverged at step {step} (t = {time})")]
    OracleDiverged { step: usize, time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integrity check failed for {path}: {detail}")]
    Integrity { path: String, detail: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
