use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("source and sink must differ")]
    SourceEqualsSink,
    #[error("vertex index {index} out of range for n = {n}")]
    VertexOutOfRange { index: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("invalid capacity on edge {edge}: {reason}")]
    InvalidCapacity { edge: usize, reason: String },
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("flow is not strictly feasible on edge {edge}")]
    InfeasibleFlow { edge: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("demand vector does not sum to zero (sum = {sum:e})")]
    NotBalanced { sum: f64 },
    #[error("invalid resistance on edge {edge}")]
    InvalidResistance { edge: usize },
    #[error("resistance ratio {ratio:e} exceeds guard {guard:e}")]
    ResistanceRatio { ratio: f64, guard: f64 },
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("duality gap term is invalid: 1 + gap/m = {0:e}")]
    InvalidGap(f64),
    #[error("congestion {congestion:.4} exceeds limit {limit}")]
    CongestionExceeded { congestion: f64, limit: f64 },
    #[error("step magnitude {magnitude:e} exceeds bound {bound:e}")]
    StepBoundExceeded { magnitude: f64, bound: f64 },
    #[error("dual fit residual {residual:e} exceeds tolerance {tol:e}")]
    PoorDualFit { residual: f64, tol: f64 },
    #[error("coupling residual {residual:e} exceeds tolerance {tol:e}")]
    CouplingLost { residual: f64, tol: f64 },
    #[error("weight change is degenerate (zero g vector)")]
    DegenerateStep,
    #[error("weight budget exceeded: {value:e} > {limit:e}")]
    WeightBudgetExceeded { value: f64, limit: f64 },
    #[error("iteration cap {0} exceeded")]
    IterationCapExceeded(usize),
    #[error("capacity on edge {edge} is not integral")]
    NonIntegralCapacity { edge: usize },
    #[error("oracle mismatch: solver value {solver}, oracle value {oracle}")]
    OracleMismatch { solver: i64, oracle: i64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FlowError {
    fn from(e: std::io::Error) -> Self {
        FlowError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlowError>;
