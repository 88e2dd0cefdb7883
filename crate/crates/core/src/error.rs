use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty channel")]
    EmptyChannel,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("mismatched grid spacing: {0} s vs {1} s")]
    GridMismatch(f64, f64),

    #[error("zero-energy waveform")]
    ZeroEnergy,

    #[error("cannot upsample: sampling rate {rate} Hz exceeds grid rate {grid_rate} Hz")]
    CannotUpsample { rate: f64, grid_rate: f64 },

    #[error("jitter requires sampled filter")]
    JitterRequiresSampledFilter,

    #[error("symbol period {period} s is shorter than grid spacing {dt} s")]
    SymbolPeriodTooShort { period: f64, dt: f64 },

    #[error("detection window [{start}, {end}) s exceeds waveform support [{lo}, {hi}) s")]
    WindowOutOfBounds { start: f64, end: f64, lo: f64, hi: f64 },

    #[error("peak time {0} s lies outside the waveform")]
    PeakOutsideWaveform(f64),

    #[error("missing channel for pair {tx} -> {rx}")]
    MissingChannel { tx: String, rx: String },

    #[error("missing TR filter for link {tx} -> {rx}")]
    MissingFilter { tx: String, rx: String },

    #[error("length mismatch: {0} energies vs {1} bits")]
    LengthMismatch(usize, usize),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
