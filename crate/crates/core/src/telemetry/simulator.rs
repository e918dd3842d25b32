use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::State;
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::TelemetryError;
use crate::clock::Clock;

const MS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_ms: u64,
    pub watts: f64,
}

/// Piecewise-constant power trace served by the simulated plug.
///
/// The trace starts at host time `start_ts_ms`; before the start and after
/// the last segment the simulated load draws nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceProfile {
    pub start_ts_ms: i64,
    #[serde(default)]
    pub injected_offset_ms: i64,
    pub segments: Vec<Segment>,
}

impl TraceProfile {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.segments.is_empty() {
            return Err(TelemetryError::InvalidProfile("no segments".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration_ms == 0 {
                return Err(TelemetryError::InvalidProfile(format!("segment {i}: duration_ms must be > 0")));
            }
            if !(seg.watts.is_finite() && seg.watts >= 0.0) {
                return Err(TelemetryError::InvalidProfile(format!(
                    "segment {i}: watts must be finite and >= 0, got {}",
                    seg.watts
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TelemetryError> {
        let p: Self = serde_json::from_str(text).map_err(|e| TelemetryError::InvalidProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, TelemetryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn total_ms(&self) -> u64 {
        self.segments.iter().map(|s| s.duration_ms).sum()
    }

    pub fn end_ts_ms(&self) -> i64 {
        self.start_ts_ms + self.total_ms() as i64
    }

    /// Instantaneous power at host time `t_ms`. Segments are half-open, so a
    /// query exactly on a boundary sees the later segment.
    pub fn watts_at(&self, t_ms: i64) -> f64 {
        let mut rel = t_ms - self.start_ts_ms;
        if rel < 0 {
            return 0.0;
        }
        for seg in &self.segments {
            if rel < seg.duration_ms as i64 {
                return seg.watts;
            }
            rel -= seg.duration_ms as i64;
        }
        0.0
    }

    /// Exact energy delivered from the trace start up to host time `t_ms`, in Wh.
    pub fn wh_at(&self, t_ms: i64) -> f64 {
        let mut rel = t_ms - self.start_ts_ms;
        let mut wh = 0.0;
        for seg in &self.segments {
            if rel <= 0 {
                break;
            }
            let covered = rel.min(seg.duration_ms as i64);
            wh += seg.watts * covered as f64 / MS_PER_HOUR;
            rel -= covered;
        }
        wh
    }

    fn status(&self, host_ms: i64) -> Value {
        json!({
            "power_w": self.watts_at(host_ms),
            "energy_wh_total": self.wh_at(host_ms),
            "ts_ms": host_ms + self.injected_offset_ms,
        })
    }
}

struct SimState {
    profile: TraceProfile,
    clock: Clock,
}

async fn status(State(state): State<Arc<SimState>>) -> Json<Value> {
    Json(state.profile.status(state.clock.now_ms()))
}

/// Running simulated plug. Dropping the handle leaves the server running;
/// call [`SimulatedPlug::shutdown`] to kill it.
pub struct SimulatedPlug {
    addr: SocketAddr,
    task: JoinHandle<()>,
    stop: oneshot::Sender<()>,
}

impl SimulatedPlug {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting and closes idle connections; a request already in
    /// flight may still complete.
    pub fn shutdown(self) {
        let _ = self.stop.send(());
    }

    /// Resolves when the server task exits.
    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Serves `GET /status` in the canonical schema for `profile`, reading host
/// time from `clock`.
pub async fn serve_simulated_plug(
    profile: TraceProfile,
    bind: SocketAddr,
    clock: Clock,
) -> Result<SimulatedPlug, TelemetryError> {
    profile.validate()?;
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| TelemetryError::Bind { addr: bind.to_string(), message: e.to_string() })?;
    let addr = listener
        .local_addr()
        .map_err(|e| TelemetryError::Bind { addr: bind.to_string(), message: e.to_string() })?;
    let app = Router::new()
        .route("/status", get(status))
        .with_state(Arc::new(SimState { profile, clock }));
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            if stopped.await.is_err() {
                // handle dropped without shutdown: keep serving
                std::future::pending::<()>().await;
            }
        });
        if let Err(e) = serve.await {
            tracing::error!("simulated plug stopped: {e}");
        }
    });
    Ok(SimulatedPlug { addr, task, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(segs: &[(u64, f64)]) -> TraceProfile {
        TraceProfile {
            start_ts_ms: 0,
            injected_offset_ms: 0,
            segments: segs.iter().map(|&(d, w)| Segment { duration_ms: d, watts: w }).collect(),
        }
    }

    #[test]
    fn one_kilowatt_for_an_hour() {
        let p = profile(&[(3_600_000, 1000.0)]);
        assert_eq!(p.wh_at(3_600_000), 1000.0);
        assert_eq!(p.wh_at(7_200_000), 1000.0);
    }

    #[test]
    fn zero_power_never_accumulates() {
        let p = profile(&[(1000, 0.0)]);
        for t in [-5, 0, 500, 1000, 5000] {
            assert_eq!(p.wh_at(t), 0.0);
        }
    }

    #[test]
    fn piecewise_integral_mid_segment() {
        let p = profile(&[(1000, 100.0), (1000, 300.0)]);
        let expected = (100.0 * 1.0 + 300.0 * 0.5) / 3600.0;
        assert!((p.wh_at(1500) - expected).abs() < 1e-12);
        assert!((p.wh_at(1500) - 0.069444).abs() < 1e-6);
    }

    #[test]
    fn watts_follow_half_open_segments() {
        let p = profile(&[(1000, 100.0), (1000, 300.0)]);
        assert_eq!(p.watts_at(-1), 0.0);
        assert_eq!(p.watts_at(0), 100.0);
        assert_eq!(p.watts_at(999), 100.0);
        assert_eq!(p.watts_at(1000), 300.0);
        assert_eq!(p.watts_at(2000), 0.0);
    }

    #[test]
    fn validation_rejects_bad_profiles() {
        assert!(profile(&[]).validate().is_err());
        assert!(profile(&[(0, 10.0)]).validate().is_err());
        assert!(profile(&[(10, -1.0)]).validate().is_err());
        assert!(profile(&[(10, f64::NAN)]).validate().is_err());
        assert!(TraceProfile::from_json(r#"{"start_ts_ms": 0, "segments": [{"duration_ms": 5, "watts": -3}]}"#).is_err());
    }

    #[test]
    fn profile_file_format() {
        let p = TraceProfile::from_json(
            r#"{"start_ts_ms": 17, "injected_offset_ms": -4, "segments": [{"duration_ms": 10000, "watts": 200}]}"#,
        )
        .unwrap();
        assert_eq!(p.start_ts_ms, 17);
        assert_eq!(p.injected_offset_ms, -4);
        assert_eq!(p.segments[0], Segment { duration_ms: 10_000, watts: 200.0 });
    }

    #[tokio::test]
    async fn bind_failure_is_reported() {
        let first = serve_simulated_plug(profile(&[(10, 1.0)]), "127.0.0.1:0".parse().unwrap(), Clock::System)
            .await
            .unwrap();
        let taken = first.addr();
        let second = serve_simulated_plug(profile(&[(10, 1.0)]), taken, Clock::System).await;
        assert!(matches!(second, Err(TelemetryError::Bind { .. })));
        first.shutdown();
    }
}
