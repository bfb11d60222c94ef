use thiserror::Error;

/// Errors raised by the solver and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("initial point is outside dom h")]
    InfeasibleStart,

    /// The inner k2/k3 loop exceeded its safety cap. On consistent oracles the
    /// number of repeats is bounded, so hitting the cap points at a broken oracle.
    #[error("inner loop exceeded {cap} repeats at iteration {iteration}")]
    InnerLoopCap { iteration: usize, cap: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("instance file: {0}")]
    Instance(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
