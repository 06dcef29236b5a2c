use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point with norm {norm} lies outside the domain of radius {radius}")]
    OutOfDomain { norm: f64, radius: f64 },

    #[error("evaluation at a declared singular point")]
    SingularPoint,

    #[error("frame is rank deficient (Gram determinant {gram_det:e})")]
    DegenerateFrame { gram_det: f64 },

    #[error("quadrature error estimate {error:e} exceeds tolerance {tolerance:e} (value {value})")]
    QuadratureFailure {
        value: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("radial average too close to the sphere center ({norm:e})")]
    ProjectionFailure { norm: f64 },

    #[error("second point lies within {distance:e} of the plane")]
    PlaneDegenerate { distance: f64 },

    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid link map: {0}")]
    InvalidLink(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("task `{task}` failed: {reason}")]
    TaskFailure { task: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
