use thiserror::Error;

/// Errors produced by curve processing, registration and scenario replay.
#[derive(Debug, Error)]
pub enum Error {
    #[error("polyline is degenerate (zero total length)")]
    DegeneratePolyline,
    #[error("need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("segment length must be positive, got {0}")]
    NonPositiveDeltaL(f64),
    #[error("nodes are not uniformly spaced: segment {index} has length {actual}, expected {expected}; run resample_uniform first")]
    NonUniformSpacing {
        index: usize,
        actual: f64,
        expected: f64,
    },
    #[error("adjacent nodes {index} and {} coincide", index + 1)]
    CoincidentNodes { index: usize },
    #[error("polyline cannot be resampled into {chords} equal chords: it folds back on itself, so no uniform-chord sampling reaches its endpoint")]
    ResampleTooCoarse { chords: usize },
    #[error("invalid registration config: {0}")]
    InvalidConfig(String),
    #[error("sigma2 must be positive, got {0}")]
    NonPositiveSigma2(f64),
    #[error("M-step linear system is singular (sigma2 = {sigma2}, lambda = {lambda})")]
    SingularSystem { sigma2: f64, lambda: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("test node {node} has zero total posterior mass")]
    ZeroPosteriorMass { node: usize },
    #[error("node index {index} out of range for {count} nodes")]
    NodeOutOfRange { index: usize, count: usize },
    #[error("train_before has {before} nodes but train_after has {after}")]
    NodeCountMismatch { before: usize, after: usize },
    #[error("closed keyframe {index} carries no grasp node index")]
    MissingGraspNode { index: usize },
    #[error("trajectory contains no closed keyframe")]
    NoGraspKeyframe,
    #[error("state continuity violated between step {step} and step {}", step + 1)]
    ContinuityViolation { step: usize },
    #[error("gripper path point ({x}, {y}) is beyond reach of anchored node {anchor}")]
    OutOfReach { x: f64, y: f64, anchor: usize },
    #[error("unknown fixture '{name}'; available: {available}")]
    UnknownFixture { name: String, available: String },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error("plot has no drawable layer")]
    EmptyPlot,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a step index to an error propagating out of a multi-step task.
    pub fn at_step(self, step: usize) -> Error {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
