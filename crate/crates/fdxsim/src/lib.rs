//! Link-level simulator for a full-duplex multiuser SC-FDMA cellular link.
//!
//! Models one cell: a base station with `n_e` antennas and `k` single-antenna
//! terminals, all transmitting and receiving in-band simultaneously. The
//! uplink is detected with a per-subcarrier MMSE equalizer plus successive
//! interference cancellation ordered by received power; the downlink is
//! precoded with per-subcarrier SVD beamforming, zero-forcing across users,
//! and water-filling power allocation. Transmit-side nonlinearity, transmit
//! noise and staged self-interference cancellation are configurable, and the
//! harness sweeps Es/N0 to produce BER curves as CSV.
//!
//! The crate is organised in layers:
//!
//! * [`dsp`] — deterministic transform/matrix primitives,
//! * [`modem`], [`channel`], [`scfdma`], [`impairments`] — signal path pieces,
//! * [`uplink`], [`downlink`] — the two detection/precoding chains,
//! * [`sim`] — configuration, per-trial orchestration, sweeps and CSV output.
//!
//! All randomness flows from a single master seed; each Monte-Carlo trial
//! draws from its own counter-derived stream, so results are byte-identical
//! regardless of how many worker threads run the sweep.

pub mod channel;
pub mod downlink;
pub mod dsp;
pub mod impairments;
pub mod modem;
pub mod scfdma;
pub mod sim;
pub mod uplink;

mod rng;

pub use rng::trial_rng;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SimError {
    /// Block or matrix dimensions do not match what the operation requires.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A scalar parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A channel row was identically zero where a direction is required.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    /// A matrix that must be inverted is singular or rank-deficient.
    #[error("singular system: {0}")]
    Singular(String),
    /// Water-filling could not allocate power.
    #[error("allocation failed: {0}")]
    Allocation(String),
    /// A configuration field violates an invariant. Carries the field name.
    #[error("invalid config: field `{field}`: {reason}")]
    Config { field: String, reason: String },
    /// File I/O failure, with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        SimError::Dimension(msg.into())
    }
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        SimError::Parameter(msg.into())
    }
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
