//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty signal")]
    EmptySignal,

    #[error("signal too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("non-finite sample at index {index}: {value}")]
    NonFiniteSample { index: usize, value: f64 },

    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),

    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist_hz}) (Nyquist)")]
    BadCutoff { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("window of {window} samples is invalid for a signal of {len} samples")]
    BadWindow { window: usize, len: usize },

    #[error("sample rates differ: {a} Hz vs {b} Hz")]
    RateMismatch { a: f64, b: f64 },

    #[error("lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },

    #[error("cannot decimate {source_hz} Hz to {target_hz} Hz: ratio is not a positive integer")]
    NonIntegerDecimation { source_hz: f64, target_hz: f64 },

    #[error("interpolation time {t} s outside signal support [{t0} s, {t1} s]")]
    TimeOutOfSupport { t: f64, t0: f64, t1: f64 },

    #[error("degenerate affine map: source min {min} equals source max {max}")]
    DegenerateRange { min: f64, max: f64 },

    #[error("correlation undefined: {0} sequence is constant")]
    ConstantSequence(&'static str),

    #[error("traces overlap for {overlap_s:.3} s, need at least {min_s:.3} s")]
    InsufficientOverlap { overlap_s: f64, min_s: f64 },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("batch of {0} is too small for batch statistics, need at least 2")]
    BatchTooSmall(usize),

    #[error("no valid frames in batch")]
    EmptyMask,

    #[error("backward called without a cached forward pass")]
    MissingForwardCache,

    #[error("non-finite {what} encountered during training (epoch {epoch})")]
    NonFiniteTraining { what: &'static str, epoch: usize },

    #[error("invalid model configuration: {0}")]
    BadModelConfig(String),

    #[error("invalid training configuration: {0}")]
    BadTrainConfig(String),

    #[error("invalid split request: {0}")]
    BadSplit(String),

    #[error("no split satisfying the segment-fraction window was found after {attempts} attempts")]
    SplitSearchExhausted { attempts: usize },

    #[error("unknown utterance id {0:?}")]
    UnknownUtterance(String),

    #[error("unknown speaker id {0:?}")]
    UnknownSpeaker(String),

    #[error("invalid synthesis script: {0}")]
    BadScript(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {detail}")]
    BadFile {
        path: std::path::PathBuf,
        detail: String,
    },

    #[error("output {path} already exists and holds different content (pass force to overwrite)")]
    WouldOverwrite { path: std::path::PathBuf },

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an io error with the path that produced it.
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Flag a malformed file with a human-readable reason.
    pub fn bad_file(path: impl Into<std::path::PathBuf>, detail: impl Into<String>) -> Self {
        Error::BadFile {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad user input (configs, arguments) rather
    /// than by runtime failures. The CLI maps these to a distinct exit code.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::BadModelConfig(_)
                | Error::BadTrainConfig(_)
                | Error::BadSplit(_)
        )
    }
}
