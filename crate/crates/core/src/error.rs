use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlatnessError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ball B({radius}) around the center contains no sample points")]
    EmptyBall { radius: f64 },

    #[error("scale {radius} is below the floor {floor} (8 x sample spacing)")]
    ScaleBelowFloor { radius: f64, floor: f64 },

    #[error("center is not a sample point (nearest sample at distance {distance})")]
    CenterNotInCloud { distance: f64 },

    #[error("point is not on the plane (distance {distance})")]
    NotOnPlane { distance: f64 },

    #[error("points coincide")]
    CoincidentPoints,

    #[error("frame condition violated: max deviation {deviation} > 1/10")]
    FrameCondition { deviation: f64 },

    #[error("degenerate witnesses: simplex volume {volume}")]
    DegenerateWitnesses { volume: f64 },

    #[error("need {needed} affinely independent samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("size cap exceeded: {size} > {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("map is not defined on every point of the domain (missing index {0})")]
    PartialMap(usize),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("inconsistent distances: Cayley-Menger determinant {0} has the wrong sign")]
    InconsistentDistances(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for FlatnessError {
    fn from(err: std::io::Error) -> Self {
        FlatnessError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FlatnessError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> FlatnessError {
    FlatnessError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
