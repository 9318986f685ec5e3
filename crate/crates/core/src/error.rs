use thiserror::Error;

use crate::lattice::NodeRef;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by lattice, measure and risk-measure operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("lattice has {count} nodes, above the configured limit of {limit}")]
    NodeLimit { count: usize, limit: usize },

    #[error("time index {index} out of range (lattice has {len} time points)")]
    TimeIndex { index: usize, len: usize },

    #[error("time index {later} precedes {earlier}")]
    TimeOrder { earlier: usize, later: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid kernel at node {node}: {reason}")]
    InvalidKernel { node: NodeRef, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("null element: the capacity of the variable is zero")]
    NullElement,

    #[error("restriction to the time-{time} sigma-algebra is {found}, expected {expected}")]
    Restriction {
        time: usize,
        expected: &'static str,
        found: &'static str,
    },

    #[error("no finite penalty at node {0}")]
    NoFinitePenalty(NodeRef),

    #[error("measure is not absolutely continuous at node {0}")]
    NotAbsolutelyContinuous(NodeRef),

    #[error("selection count {count} exceeds cap {cap}")]
    SelectionCap { count: u128, cap: usize },

    #[error("not a stopping time: {0}")]
    NotStoppingTime(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("position not accepted at node {0}")]
    NotAccepted(NodeRef),

    #[error("precondition violated at node {node}: {reason}")]
    Precondition { node: NodeRef, reason: String },

    #[error("stability bound violated: dt = {dt} exceeds h^2 / sigma_high^2 = {max_dt}; use dt <= {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("grid: {0}")]
    Grid(String),

    #[error("{count} monitoring dates exceed the cap of {cap}")]
    MonitoringCap { count: usize, cap: usize },

    #[error("json: {0}")]
    Json(String),
}

impl Error {
    /// True for failures of a numerical nature (solver breakdown, stability
    /// bound), as opposed to malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::Cfl { .. })
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
