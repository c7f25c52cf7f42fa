use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid structuring element: {0}")]
    InvalidStructuringElement(String),

    #[error("channel index {index} out of range for {channels} channels")]
    ChannelOutOfRange { index: usize, channels: usize },

    #[error("grid mismatch: expected {expected:?}, got {actual:?}")]
    GridMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("negative value {value} at pixel {pixel}, channel {channel}")]
    NegativeValue {
        pixel: usize,
        channel: usize,
        value: f64,
    },

    #[error("pixel {0} has an all-zero spectrum")]
    ZeroRow(usize),

    #[error("channel {0} sums to zero over the image")]
    ZeroColumn(usize),

    #[error("leveling did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("input has zero variance")]
    ZeroVariance,

    #[error("abscissa values are degenerate (fewer than two distinct values)")]
    DegenerateAbscissa,

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("no marker pixels")]
    NoMarkers,

    #[error("marker set is empty after opening with radius {radius}")]
    EmptyMarkers { radius: usize },

    #[error("gradient value {value} at pixel {pixel} is outside [0, 1]")]
    GradientOutOfRange { pixel: usize, value: f64 },

    #[error("malformed HYP1 file: {0}")]
    Format(String),

    #[error("truncated HYP1 payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::InvalidStructuringElement(_)
            | Error::ChannelOutOfRange { .. }
            | Error::Json(_) => ErrorClass::Config,
            Error::NotConverged { .. }
            | Error::SingularCovariance
            | Error::ZeroVariance
            | Error::DegenerateAbscissa
            | Error::Decomposition(_) => ErrorClass::Numerical,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
