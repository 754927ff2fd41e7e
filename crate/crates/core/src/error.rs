//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NicoError {
    #[error("state labels are not unique: {0:?} appears more than once")]
    DuplicateLabel(String),

    #[error("state space must contain at least one state")]
    EmptyStateSpace,

    #[error("observation must contain at least one vertex")]
    EmptyObservation,

    #[error("observation contains a repeated vertex (index {0})")]
    RepeatedVertex(usize),

    #[error("known-endpoints observation needs at least two vertices, got {0}")]
    EndpointsNeedTwo(usize),

    #[error("state index {index} out of range for {num_states} states")]
    StateOutOfRange { index: usize, num_states: usize },

    #[error("permutation of length {0} is not a bijection on its positions")]
    NotAPermutation(usize),

    #[error("permutation length {perm} does not match observation length {obs}")]
    LengthMismatch { perm: usize, obs: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("observation length {n} exceeds the exact enumeration cap {cap}")]
    EnumerationCapExceeded { n: usize, cap: usize },

    #[error("every permutation of the observation has zero probability under the model")]
    ZeroSupportObservation,

    #[error("all {0} importance weights are zero; observation unsupported under current model")]
    AllWeightsZero(usize),

    #[error("no positively weighted sample available")]
    NoPositiveWeight,

    #[error("expected known-endpoints observations, found free-ordered one")]
    RequiresKnownEndpoints,

    #[error("observations mix endpoint modes")]
    MixedEndpointModes,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample-size bound undefined: {0}")]
    BoundUndefined(String),

    #[error("no observations supplied")]
    NoObservations,

    #[error("E-step failed for observation {index}: {source}")]
    EstepFailed {
        index: usize,
        #[source]
        source: Box<NicoError>,
    },

    #[error("row {0} of the transition update is entirely clipped to zero")]
    RowClippedToZero(usize),

    #[error("vertex {dest} is not reachable from {src}")]
    Unreachable { src: usize, dest: usize },

    #[error("random route retry cap exhausted after {0} attempts")]
    RouteRetryExhausted(usize),

    #[error("path resampling cap exhausted at step {step} (model too loopy for length {len})")]
    ResampleCapExhausted { step: usize, len: usize },

    #[error("power iteration did not converge after {0} iterations")]
    StationaryNotConverged(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown label {label:?} at line {line}")]
    UnknownLabel { label: String, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NicoError>;
