use thiserror::Error;

use crate::model::ValidationReport;

/// Errors produced anywhere in the simulation and processing chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(ValidationReport),

    #[error("phase-noise breakpoint at {offset_hz} Hz exceeds the Nyquist limit of {rate_hz} Hz sampling")]
    BreakpointBandExceedsRate { offset_hz: f64, rate_hz: f64 },

    #[error("frame has no samples or no chirps")]
    EmptyFrame,

    #[error("no bins left to search or measure in the requested band")]
    BandEmpty,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("degenerate conic: {0}")]
    DegenerateConic(&'static str),

    #[error("leakage peak-to-floor ratio {measured_db:.1} dB is below the {required_db:.1} dB calibration margin")]
    LowSnrForCalibration { measured_db: f64, required_db: f64 },

    #[error("correction transform is singular (|cos(theta_E)| = {cos_theta:e})")]
    SingularTransform { cos_theta: f64 },

    #[error("requested {requested} chirps but frame holds {available}")]
    TooFewChirps { requested: usize, available: usize },

    #[error("spectra axes do not match")]
    AxisMismatch,

    #[error("no peak above floor + 3 dB near the expected target location")]
    PeakNotFound,

    #[error("malformed frame dump: {0}")]
    BadDump(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
