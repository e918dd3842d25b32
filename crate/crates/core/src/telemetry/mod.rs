//! Smart-plug telemetry: the canonical status schema, a polling client with
//! clock-offset probing, the sampler loop, and a simulated plug.

mod client;
mod sampler;
mod schema;
mod simulator;

pub use client::PlugClient;
pub use sampler::{run_sampler, Gap, SampleSink, SamplerConfig, SamplerHandle, SamplerOutcome};
pub use schema::{ClockOffset, PowerSample, Scale, StatusMapping};
pub use simulator::{serve_simulated_plug, Segment, SimulatedPlug, TraceProfile};

/// Default polling period of the plug, in milliseconds.
pub const DEFAULT_INTERVAL_MS: u64 = 500;
/// Polling faster than this risks overloading plug firmware.
pub const MIN_INTERVAL_MS: u64 = 100;
/// Consecutive failed polls tolerated before the sampler gives up.
pub const DEFAULT_FAILURE_LIMIT: u32 = 10;

#[derive(Debug, thiserror::Error)]
pub enum TelemetryError {
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("protocol error: missing field `{0}` in status payload")]
    MissingField(String),
    #[error("protocol error: field `{field}` has invalid value {value}")]
    InvalidValue { field: String, value: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid trace profile: {0}")]
    InvalidProfile(String),
    #[error("cannot bind simulated plug to {addr}: {message}")]
    Bind { addr: String, message: String },
    #[error("sample sink failed: {0}")]
    Sink(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl TelemetryError {
    /// Transport failures are worth retrying; everything else is not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, TelemetryError::Transport { .. })
    }
}
