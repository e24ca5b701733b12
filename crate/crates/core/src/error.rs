use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cycle through node `{node}`")]
    Cycle { node: String },
    #[error("node `{node}` references unknown `{reference}`")]
    UnknownReference { node: String, reference: String },
    #[error("node `{node}`: {detail}")]
    ArityMismatch { node: String, detail: String },
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("node `{node}`: {detail}")]
    InvalidSpec { node: String, detail: String },
    #[error("invalid parameter for node `{node}`: {detail}")]
    InvalidParameter { node: String, detail: String },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("model description: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("slot {0} appears in more than one sampler")]
    Overlap(usize),
    #[error("slot {0} is not covered by any sampler")]
    Uncovered(usize),
    #[error("slot {slot} is out of range for {dim} parameters")]
    OutOfRange { slot: usize, dim: usize },
    #[error("block samplers need at least two slots")]
    BlockTooSmall,
    #[error("unknown parameter name `{0}`")]
    UnknownSlot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error("{retained} retained samples; at least 10 are needed")]
    TooFewSamples { retained: usize },
    #[error("discard fraction {0} outside [0, 1)")]
    BadDiscard(String),
}

#[derive(Debug, Error)]
pub enum AutoblockError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("every parameter is stuck at a constant value; no correlation structure to cluster")]
    DegenerateChain,
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticsError {
    #[error("chain of length {len} is too short; at least 10 samples are needed")]
    TooShort { len: usize },
}
