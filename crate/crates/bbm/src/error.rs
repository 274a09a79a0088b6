use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BbmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("kernel obstruction: right-hand side has projection {projection:.3e} on the kernel")]
    KernelObstruction { projection: f64 },

    #[error("mean obstruction: integral {mean:.3e} is not zero")]
    MeanObstruction { mean: f64 },

    #[error("iterative solve stalled after {iterations} iterations, residual {residual:.3e}")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("field is not resolved: spectral tail {tail:.3e} relative to peak")]
    Unresolved { tail: f64 },

    #[error("outside modulation neighborhood: {0}")]
    OutsideModulation(String),

    #[error("near-singular modulation jacobian (determinant {det:.3e})")]
    SingularJacobian { det: f64 },

    #[error("non-finite value encountered at t = {time}")]
    NonFinite { time: f64 },

    #[error("functional ill-defined: {0}")]
    IllDefined(String),
}

pub type Result<T> = std::result::Result<T, BbmError>;

pub(crate) fn invalid(msg: impl Into<String>) -> BbmError {
    BbmError::InvalidParameter(msg.into())
}
