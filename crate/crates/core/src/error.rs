use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("case file line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("{kind} {id} references missing bus {bus}")]
    DanglingBus { kind: &'static str, id: usize, bus: usize },

    #[error("grid is disconnected: bus {0} is unreachable from the slack bus")]
    Disconnected(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("reduced susceptance matrix is singular at bus {bus}")]
    SingularSusceptance { bus: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("distribution factors of zone {zone} sum to {sum}, expected 1")]
    FactorSum { zone: usize, sum: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { what, detail: detail.into() }
    }
}
