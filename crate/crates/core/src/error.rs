//! Crate-wide error type.
//!
//! Variants are grouped by what the caller can do about them: configuration
//! and precondition violations, I/O, and numeric failures. The CLI maps these
//! groups onto its exit codes.

use thiserror::Error;

/// Any failure produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A WAV file violated the fixed on-disk contract (PCM, 16-bit, mono).
    /// Message names the offending header field, e.g. `channels=2`.
    #[error("wav format: {field}={value} (expected {expected})")]
    WavFormat {
        field: &'static str,
        value: String,
        expected: &'static str,
    },

    /// Two signals or tensors that must agree in length did not.
    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    /// Tensor shapes incompatible for the named operation.
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },

    /// A signal required to carry energy was silent (or an operand empty).
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    /// Requested reverberation time is unreachable for the room: the Sabine
    /// absorption coefficient came out >= 1.
    #[error("infeasible room: absorption {alpha:.4} >= 1 (volume {volume:.3} m^3, rt60 {rt60:.3} s)")]
    InfeasibleRoom { alpha: f64, volume: f64, rt60: f64 },

    /// Geometric precondition violation (positions outside the room,
    /// coincident source and microphone, rejection sampling exhausted).
    #[error("geometry: {0}")]
    Geometry(String),

    /// Invalid configuration value or violated operation precondition.
    #[error("config: {0}")]
    Config(String),

    /// A metric is undefined for the given input (e.g. single-class ROC).
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// Non-finite value where the algorithm requires finite arithmetic.
    #[error("numeric: {0}")]
    NonFinite(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("manifest parse: {0}")]
    ManifestParse(#[from] serde_json::Error),

    #[error("toml parse: {0}")]
    TomlParse(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures of numeric health (NaN/Inf) as opposed to bad
    /// configuration or I/O; the CLI reports these with a distinct exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }

    /// True for filesystem-level failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
