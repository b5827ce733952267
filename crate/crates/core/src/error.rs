use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error at {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model/input mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("class {class} has {have} samples, need {need}")]
    ClassTooSmall {
        class: usize,
        have: usize,
        need: usize,
    },
    #[error("selection shortfall in class {class}: {have} candidates for budget {need}")]
    Shortfall {
        class: usize,
        have: usize,
        need: usize,
    },
    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),
    #[error("prediction coverage mismatch in phase {phase}: {msg}")]
    Coverage { phase: usize, msg: String },
    #[error("score file error: {0}")]
    Scores(String),
    #[error("manifest error: {0}")]
    Manifest(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors that stem from a bad configuration rather than a
    /// failure at run time. The CLI maps these to a distinct exit code.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
