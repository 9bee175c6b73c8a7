use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the set-arithmetic layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("empty box")]
    Empty,
}

/// Errors raised while fitting or evaluating perception contracts.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContractError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("singular design matrix; collinear feature columns {collinear:?}")]
    SingularDesign { collinear: Vec<usize> },
    #[error("quantile solver failed after {iterations} iterations (duality gap {gap:e})")]
    SolverFailure { iterations: usize, gap: f64 },
    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("environment grid has no active cells")]
    SamplerExhausted,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors raised by reachability analysis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReachError {
    #[error("reach set blew up at step {step}: width {width:e} on dim {dim} exceeds cap {cap:e}")]
    Blowup { step: usize, dim: usize, width: f64, cap: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors raised by the refinement loop and its helpers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("box is degenerate relative to the initial set")]
    DegenerateBox,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors raised while configuring the case-study systems.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
