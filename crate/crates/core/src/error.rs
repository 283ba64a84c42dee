use thiserror::Error;

/// Errors produced anywhere in the simulator.
///
/// Variants are grouped so that a front end can map them onto a small set of
/// exit codes with [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("only {found} bound states found, {requested} requested")]
    BoundStateShortfall { requested: usize, found: usize },

    #[error("channel {channel} sits within {tolerance:e} meV of its threshold (T = {kinetic:e} meV); shift the energy slightly")]
    NearThreshold { channel: usize, kinetic: f64, tolerance: f64 },

    #[error("linear solve did not reach tolerance {tolerance:e}; residual history {history:?}")]
    NotConverged { tolerance: f64, history: Vec<f64> },

    #[error("flux conservation violated: defect {defect:e} exceeds {tolerance:e}")]
    Conservation { defect: f64, tolerance: f64 },

    #[error("singular matrix encountered while factorizing: {0}")]
    Singular(String),

    #[error("density matrix is not positive semidefinite: eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("matrix is not X-structured: off-pattern element of size {0:e}")]
    NotXState(f64),

    #[error("overlap matrix is not unitary: defect {0:e}")]
    Basis(f64),

    #[error("sweep produced no converged point: {0}")]
    SweepFailed(String),

    #[error("all traveling amplitudes vanish")]
    DegenerateInput,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Solver,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::NotXState(_) | Error::Basis(_) => {
                ErrorKind::Validation
            }
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Solver,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
