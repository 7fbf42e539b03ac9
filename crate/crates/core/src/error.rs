//! Error type shared by all toolkit modules.
//!
//! Variants are grouped by how the CLI reports them: parameter/configuration
//! problems (exit code 2), data and file-format problems (exit code 3), and
//! numerical degeneracies discovered while running (exit code 4).

/// Toolkit-wide error.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric parameter is out of its documented domain
    /// (non-positive sample rate or time constant, depth outside [0, 1], ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested discretization is degenerate: fs·tau must exceed 0.5
    /// so the pole parameter stays in the open unit interval.
    #[error("unstable discretization: fs*tau = {0} (must exceed 0.5)")]
    Unstable(f64),

    /// Experiment configuration problem: syntax error, unknown key, or a
    /// value that does not parse.
    #[error("config error: {0}")]
    Config(String),

    /// Input data problem: non-finite samples, empty input, or responses
    /// whose shapes/sample rates disagree.
    #[error("data error: {0}")]
    Data(String),

    /// A population file's header line is not understood.
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    /// A binary population file ends before the header-promised payload.
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    /// Matrix dimensions disagree with the header, with a peer response, or
    /// with each other (ragged CSV rows, trailing bytes, zero-sized axes).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The inhibitory delay quantizes to at least the signal length, so the
    /// delayed pathway would carry no input at all.
    #[error("degenerate delay: {samples} samples >= signal length {len}")]
    DegenerateDelay { samples: usize, len: usize },

    /// A calibration wave measured exactly zero; the scaling factor
    /// target/measured is undefined.
    #[error("degenerate calibration: measured {wave} amplitude is zero")]
    DegenerateCalibration { wave: &'static str },

    /// The spectrum is identically zero above DC; a magnitude in dB is
    /// undefined.
    #[error("undefined magnitude: spectrum has no nonzero component above DC")]
    UndefinedMagnitude,

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI uses for this error:
    /// 2 = config/parameter, 3 = data/format, 4 = numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Unstable(_) | Error::Config(_) => 2,
            Error::Data(_)
            | Error::MalformedHeader(_)
            | Error::TruncatedPayload { .. }
            | Error::DimensionMismatch(_)
            | Error::Io(_) => 3,
            Error::DegenerateDelay { .. }
            | Error::DegenerateCalibration { .. }
            | Error::UndefinedMagnitude => 4,
        }
    }
}
