use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid MAC address {0:?}")]
    InvalidMac(String),
    #[error("duplicate MAC address {0}")]
    DuplicateMac(String),
    #[error("vector bound to a different AP registry")]
    RegistryMismatch,
    #[error("vector length {actual} does not match registry size {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite RSSI value at AP index {0}")]
    NonFiniteRssi(usize),
    #[error("empty candidate list")]
    NoCandidates,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no usable APs: candidate distances are degenerate")]
    NoUsableAps,
    #[error("unknown reference point id {0}")]
    UnknownReferencePoint(usize),
    #[error("weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("{got} samples is too few to fit asymmetric bounds (need {need}); fall back to symmetric 3-sigma bounds")]
    TooFewSamples { got: usize, need: usize },
    #[error("no bounds on the grid reach coverage 1 - {epsilon}")]
    InfeasibleCoverage { epsilon: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing raw series for reference point {point}, AP {ap}")]
    MissingSeries { point: usize, ap: usize },
    #[error("inconsistent series length: expected {expected}, found {actual} at point {point}, AP {ap}")]
    InconsistentSeries {
        point: usize,
        ap: usize,
        expected: usize,
        actual: usize,
    },
    #[error("empty online window")]
    EmptyWindow,
    #[error("timestamp {got} does not follow {last}")]
    NonIncreasingTimestamp { last: f64, got: f64 },
    #[error("reference point {id} at ({x}, {y}) lies outside the venue")]
    OutOfBounds { id: usize, x: f64, y: f64 },
    #[error("reference point ids must be contiguous from 0; found {found} at position {position}")]
    NonContiguousIds { position: usize, found: usize },
    #[error("fit failed at point {point}, AP {ap}: {source}")]
    Fit {
        point: usize,
        ap: usize,
        #[source]
        source: Box<Error>,
    },
}
