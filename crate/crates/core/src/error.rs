use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("field of degree {degree} exceeds grid design degree {max}")]
    Resolution { degree: usize, max: usize },

    #[error("unsupported sphere dimension {0} (only S^1 and S^2 are implemented)")]
    UnsupportedDimension(usize),

    #[error("convexity lost at node {node}: smallest radius of curvature {eigenvalue:e} along u = {direction:?}")]
    ConvexityLost {
        node: usize,
        eigenvalue: f64,
        direction: [f64; 3],
    },

    #[error("mean curvature {value:e} at node {node} is not positive")]
    NonPositiveMeanCurvature { node: usize, value: f64 },

    #[error("support function not positive at node {node} (s = {value:e})")]
    SupportNotPositive { node: usize, value: f64 },

    #[error("invalid speed: {0}")]
    InvalidSpeed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Config(#[from] toml::de::Error),
}
