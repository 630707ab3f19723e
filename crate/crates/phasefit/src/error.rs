//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its valid domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Runtime data is malformed (length mismatch, empty signal, zero energy, ...).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("wav: {0}")]
    Wav(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// A filter claimed to be Hermitian produced a complex time-domain frame.
    #[error("filter is not Hermitian: imaginary residue {residue:.3e} exceeds {limit:.3e}")]
    NonHermitian { residue: f64, limit: f64 },

    /// A transfer-function denominator collapsed below the safe magnitude.
    #[error("transfer denominator vanished at bin {bin} (|den| = {magnitude:.3e})")]
    TransferBlowup { bin: usize, magnitude: f64 },

    /// The waveshaper output landed on a tan singularity; the training step must be rejected.
    #[error("waveshaper output {d} lies within 1e-6 of a tan singularity")]
    TanSingularity { d: f64 },

    /// Loss or a gradient entry became non-finite during training.
    #[error("non-finite loss at restart {restart}, epoch {epoch}")]
    NonFiniteLoss { restart: usize, epoch: usize },

    /// Every restart diverged; the report carries the recorded traces.
    #[error("all {0} restarts diverged")]
    AllRestartsFailed(usize),
}
