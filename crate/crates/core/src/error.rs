use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("frequency {freq} rad/s is at or above the Nyquist limit {nyquist} rad/s")]
    Aliasing { freq: f64, nyquist: f64 },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("wavelet is not admissible: kappa*nu = {kappa_nu} must exceed 1/2")]
    NotAdmissible { kappa_nu: f64 },
    #[error("empty axis: {0}")]
    EmptyAxis(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operation requires a Gaussian window")]
    NotGaussian,
    #[error("complex-valued input is not supported: {0}")]
    ComplexInput(String),
    #[error("malformed file {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedWav(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
