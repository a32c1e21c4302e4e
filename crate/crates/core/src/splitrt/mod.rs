//! Two-process split execution over TCP.
//!
//! The edge runs layers `1..=x1` on a synthetic input, ships the boundary
//! tensor through a bandwidth-limited socket, and the server runs the rest.
//! Both sides use the same deterministic synthetic layers, so the final digest
//! must equal the one from running the whole model in one process.

pub mod edge;
pub mod server;
pub mod synth;
pub mod throttle;
pub mod wire;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use edge::{run_edge, RunReport, SegmentTimes};
pub use server::{SessionOutcome, SplitServer};
pub use synth::{execute_monolithic, run_layers, SynthError, SyntheticTensor};
pub use throttle::{Throttled, TokenBucket};
pub use wire::{Frame, WireError, PROTOCOL_VERSION};

/// Whether layer execution also burns the time the cost model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComputeMode {
    /// Only the synthetic transform runs.
    #[default]
    Synthetic,
    /// Each layer additionally busy-waits `w[i] / capacity` seconds.
    Emulated,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot connect to {addr}: {source}")]
    Connect {
        addr: String,
        source: std::io::Error,
    },
    #[error("network error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("server rejected the session (code {code}): {message}")]
    Remote { code: u16, message: String },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("invalid setup: {0}")]
    Setup(String),
}

impl From<WireError> for RunError {
    fn from(e: WireError) -> Self {
        match e {
            WireError::Io(io) => RunError::Io(io),
            other => RunError::Protocol(other.to_string()),
        }
    }
}

impl RunError {
    /// True for failures of the transport rather than of the peer's behaviour.
    pub fn is_network(&self) -> bool {
        matches!(self, RunError::Connect { .. } | RunError::Io(_))
    }
}

/// Busy-waits for `seconds`; sleeping would under-represent compute on a loaded host.
pub(crate) fn spin_for(seconds: f64) {
    if seconds.is_nan() || seconds <= 0.0 {
        return;
    }
    let deadline = Instant::now() + Duration::from_secs_f64(seconds);
    while Instant::now() < deadline {
        std::hint::spin_loop();
    }
}
