use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("signal too short: {duration_s:.3} s available, {required_s:.3} s required")]
    SignalTooShort { duration_s: f64, required_s: f64 },

    #[error("segment too short: {len} samples, embedding dimension {m} needs at least {required}")]
    SegmentTooShort { len: usize, m: usize, required: usize },

    #[error("Welch window of {window} samples is longer than the {len}-sample segment")]
    WindowLongerThanSegment { window: usize, len: usize },

    #[error("feature `{name}` is not finite ({value})")]
    FeatureNotFinite { name: String, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distortion output too short: {0}")]
    OutputTooShort(String),

    #[error("crop of {crop_s:.3} s is longer than the {duration_s:.3} s signal")]
    CropLongerThanSignal { crop_s: f64, duration_s: f64 },

    #[error("carrier has {carrier} samples, at least {required} needed")]
    CarrierTooShort { carrier: usize, required: usize },

    #[error("training data contains a single class")]
    SingleClassTraining,

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("feature fingerprint mismatch: model expects {expected}, got {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("insufficient source data: {0}")]
    InsufficientSourceData(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("unsupported encoding in {}: {msg}", path.display())]
    UnsupportedEncoding { path: PathBuf, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
