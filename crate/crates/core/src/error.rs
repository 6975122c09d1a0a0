use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("buffer length {actual} does not match {width}x{height}x{channels}")]
    BufferSize {
        width: usize,
        height: usize,
        channels: usize,
        actual: usize,
    },

    #[error("invalid pixel value {value} at index {index}: must be finite and >= 0")]
    InvalidPixel { index: usize, value: f32 },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: String },

    #[error("{path}: unsupported channel count ({channels})")]
    UnsupportedChannels { path: PathBuf, channels: u8 },

    #[error("{path}: unsupported bit depth ({bits})")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },

    #[error("depth exceeds image size: depth {depth} for {width}x{height}")]
    DepthTooLarge {
        depth: usize,
        width: usize,
        height: usize,
    },

    #[error("cannot collapse gaussian pyramid")]
    CollapseGaussian,

    #[error("duplicate exposure value {0}")]
    DuplicateExposure(f64),

    #[error("exposure stack needs at least 2 frames, got {0}")]
    StackTooShort(usize),

    #[error("invalid exposure stack: {0}")]
    InvalidStack(String),

    #[error("style code must lie in (0, 1), got {0}")]
    InvalidStyleCode(f64),

    #[error("zero-intensity input cannot be retargeted")]
    ZeroIntensity,

    #[error("invalid fusion config: {0}")]
    InvalidFusionConfig(String),

    #[error("unknown engine {0:?}")]
    UnknownEngine(String),

    #[error("engine {engine} failed: {cause}")]
    EngineFailed { engine: String, cause: String },

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("insufficient variance")]
    InsufficientVariance,

    #[error("too few samples: {got} (need {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("no valid patches")]
    NoValidPatches,

    #[error("NIQE corpus needs at least {need} images, got {got}")]
    CorpusTooSmall { got: usize, need: usize },

    #[error("model file {path}: {cause}")]
    ModelFormat { path: PathBuf, cause: String },

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("missing regressor file {0}")]
    MissingRegressor(PathBuf),

    #[error("scorer {command:?} could not be started: {cause}")]
    ScorerSpawn { command: String, cause: String },

    #[error("scorer {command:?} exited with status {status}")]
    ScorerExit { command: String, status: String },

    #[error("unparseable scorer output {0:?}")]
    ScorerOutput(String),

    #[error("metric {0} produced a non-finite score")]
    NonFiniteScore(String),

    #[error("scorer timeout after {0:?}")]
    ScorerTimeout(std::time::Duration),

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("stack lacks EV sign coverage")]
    SignCoverage,

    #[error("no scorable candidates")]
    NoScorableCandidates,

    #[error("invalid ensemble config: {0}")]
    InvalidEnsembleConfig(String),

    #[error("{path}:{line}: malformed manifest record: {cause}")]
    Manifest {
        path: PathBuf,
        line: usize,
        cause: String,
    },

    #[error("pseudo-GT for {0} did not pass the quality gate")]
    GateRejected(String),

    #[error("config {path}:{line}: {cause}")]
    Config {
        path: PathBuf,
        line: usize,
        cause: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, cause: impl ToString) -> Self {
        Error::Io {
            path: path.into(),
            cause: cause.to_string(),
        }
    }

    /// True for errors caused by the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::UnsupportedChannels { .. }
                | Error::UnsupportedBitDepth { .. }
                | Error::ModelFormat { .. }
                | Error::MissingRegressor(_)
                | Error::Manifest { .. }
                | Error::Config { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
