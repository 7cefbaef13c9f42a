use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("infeasible allocation plan: {0}")]
    InfeasiblePlan(String),

    #[error("cannot balance dataset: class {label} has no rows")]
    Balance { label: u8 },

    #[error("split error: {0}")]
    Split(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("training diverged at epoch {epoch} (lr = {lr})")]
    Divergence { epoch: usize, lr: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error at line {line}: {msg}")]
    Schema { line: usize, msg: String },

    #[error("model load error: {0}")]
    ModelLoad(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
