use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite state component `{field}` = {value}")]
    NonFiniteState { field: &'static str, value: f64 },

    #[error("non-finite action {0}")]
    NonFiniteAction(f64),

    #[error("expected input of dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("layer {layer} expects {expected} inputs but the previous layer produces {found}")]
    DimChain {
        layer: usize,
        expected: usize,
        found: usize,
    },

    #[error("layer {layer}: {what} has length {found}, expected {expected}")]
    WeightShape {
        layer: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unknown activation `{0}` (expected tanh, relu or linear)")]
    UnknownActivation(String),

    #[error("network has no layers")]
    EmptyNetwork,

    #[error("invalid action bounds: {0}")]
    ActionBounds(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no grid point satisfies goal_distance <= {d_circ}")]
    EmptyFeasibleGrid { d_circ: f64 },

    #[error("corollary bound undefined: lambda^t * p_relax = {0} >= 1")]
    BoundUndefined(f64),

    #[error("training diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("step {step}: {source}")]
    AtStep { step: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_step(self, step: u64) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
