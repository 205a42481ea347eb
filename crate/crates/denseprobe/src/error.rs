//! Crate-wide error type.

use crate::depth::AffineFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("buffer size mismatch: expected {expected} bytes, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },

    #[error("channel value {value} outside [0,1] at pixel {index}")]
    ChannelRange { value: f64, index: usize },

    #[error("zero-sized resample target {out_width}x{out_height}")]
    ZeroSizedTarget { out_width: u32, out_height: u32 },

    #[error("no valid pixels")]
    NoValidPixels,

    #[error("need at least {required} jointly valid pixels, found {actual}")]
    TooFewPixels { required: usize, actual: usize },

    #[error("field value {value} at pixel {index} must be strictly positive")]
    NonPositiveValue { value: f64, index: usize },

    #[error("non-unit normal (norm {norm}) at pixel {index}")]
    NonUnitNormal { norm: f64, index: usize },

    /// Constant prediction: the least-squares slope is undefined. Carries the
    /// fallback fit (scale 0, offset = mean of the ground truth) so callers can
    /// still score the sample, flagged as degenerate.
    #[error("degenerate affine fit: constant prediction (fallback offset {})", fallback.offset)]
    DegenerateFit { fallback: AffineFit },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown class id {id}")]
    UnknownClass { id: u8 },

    #[error("class id {id} has no category group entry")]
    UngroupedClass { id: u8 },

    #[error("label space mismatch: {0}")]
    LabelSpaceMismatch(String),

    #[error("palette invariant violated: {0}")]
    PaletteInvariant(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("format error in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("conflicting calibration cache record at {path}: {reason}")]
    CacheConflict { path: String, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error for {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 for validation-type failures, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Image { .. } => 2,
            _ => 1,
        }
    }
}
