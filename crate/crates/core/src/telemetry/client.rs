use std::time::Duration;

use serde_json::Value;

use super::{ClockOffset, PowerSample, StatusMapping, TelemetryError};
use crate::clock::Clock;

/// HTTP client for one plug.
#[derive(Clone, Debug)]
pub struct PlugClient {
    endpoint: String,
    url: String,
    mapping: StatusMapping,
    http: reqwest::Client,
    clock: Clock,
}

impl PlugClient {
    /// `endpoint` is a base URL such as `http://10.0.0.7`; a bare
    /// `host:port` is accepted and treated as plain HTTP.
    pub fn new(endpoint: &str, mapping: StatusMapping, clock: Clock) -> Result<Self, TelemetryError> {
        Self::with_timeout(endpoint, mapping, clock, Duration::from_secs(2))
    }

    pub fn with_timeout(
        endpoint: &str,
        mapping: StatusMapping,
        clock: Clock,
        timeout: Duration,
    ) -> Result<Self, TelemetryError> {
        let base = if endpoint.contains("://") {
            endpoint.trim_end_matches('/').to_string()
        } else {
            format!("http://{}", endpoint.trim_end_matches('/'))
        };
        let path = if mapping.status_path.starts_with('/') {
            mapping.status_path.clone()
        } else {
            format!("/{}", mapping.status_path)
        };
        let http = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TelemetryError::Transport { endpoint: base.clone(), message: e.to_string() })?;
        Ok(Self { url: format!("{base}{path}"), endpoint: base, mapping, http, clock })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    /// Fetches one status payload and maps it; the sample keeps the device
    /// timestamp.
    pub async fn poll_status(&self) -> Result<PowerSample, TelemetryError> {
        let body = self.fetch().await?;
        self.mapping.extract(&body)
    }

    async fn fetch(&self) -> Result<Value, TelemetryError> {
        let transport = |e: reqwest::Error| TelemetryError::Transport {
            endpoint: self.endpoint.clone(),
            message: e.to_string(),
        };
        let resp = self.http.get(&self.url).send().await.map_err(transport)?;
        let resp = resp.error_for_status().map_err(transport)?;
        let bytes = resp.bytes().await.map_err(transport)?;
        serde_json::from_slice(&bytes).map_err(|e| TelemetryError::Protocol(format!("status body is not JSON: {e}")))
    }

    /// Half-round-trip offset estimate. Each probe computes
    /// `device_ts - (t_send + t_recv) / 2`; the probe with the smallest
    /// round trip wins. Failed probes are skipped.
    pub async fn estimate_clock_offset(&self, probes: usize) -> Result<ClockOffset, TelemetryError> {
        if probes == 0 {
            return Err(TelemetryError::Precondition("at least one clock probe is required".into()));
        }
        let mut best: Option<ClockOffset> = None;
        let mut last_err = None;
        for _ in 0..probes {
            let t_send = self.clock.now_ms();
            match self.poll_status().await {
                Ok(sample) => {
                    let t_recv = self.clock.now_ms();
                    let probe = ClockOffset {
                        offset_ms: sample.ts_ms as f64 - (t_send as f64 + t_recv as f64) / 2.0,
                        rtt_ms: (t_recv - t_send) as f64,
                    };
                    if best.is_none_or(|b| probe.rtt_ms < b.rtt_ms) {
                        best = Some(probe);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        match (best, last_err) {
            (Some(b), _) => Ok(b),
            (None, Some(e)) => Err(e),
            (None, None) => unreachable!("probes >= 1"),
        }
    }
}
