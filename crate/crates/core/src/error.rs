use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dialogue has no utterances")]
    EmptyDialogue,

    #[error("{what} index {index} out of range (bound {bound})")]
    Index { what: &'static str, index: usize, bound: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}:{column}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, msg: String },

    #[error("{}: {msg}", path.display())]
    Validation { path: PathBuf, msg: String },

    #[error("unsupported checkpoint format: {0}")]
    Version(String),

    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),

    #[error("model and data disagree: {0}")]
    Mismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged (non-finite values) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
}

impl Error {
    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Diverged { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
