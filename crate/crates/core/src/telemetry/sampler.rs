use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use tokio::task::JoinHandle;

use super::{PlugClient, PowerSample, TelemetryError, DEFAULT_FAILURE_LIMIT, DEFAULT_INTERVAL_MS, MIN_INTERVAL_MS};

/// Receives samples as the sampler produces them.
pub trait SampleSink: Send + 'static {
    fn append(&mut self, sample: PowerSample) -> Result<(), String>;
}

impl SampleSink for Vec<PowerSample> {
    fn append(&mut self, sample: PowerSample) -> Result<(), String> {
        self.push(sample);
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub interval_ms: u64,
    pub failure_limit: u32,
    /// Stop on its own after this long; `None` runs until stopped.
    pub duration_ms: Option<u64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { interval_ms: DEFAULT_INTERVAL_MS, failure_limit: DEFAULT_FAILURE_LIMIT, duration_ms: None }
    }
}

/// A hole in the sample stream wider than one and a half intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub after_ts_ms: i64,
    pub gap_ms: i64,
}

#[derive(Debug)]
pub struct SamplerOutcome<S> {
    pub sink: S,
    pub polls: u64,
    pub samples: u64,
    pub failures: u64,
    pub max_gap_ms: i64,
    pub gaps: Vec<Gap>,
    /// Set when the sampler stopped on its own because of errors.
    pub abort: Option<String>,
}

pub struct SamplerHandle<S> {
    stop: watch::Sender<bool>,
    task: JoinHandle<SamplerOutcome<S>>,
}

impl<S> SamplerHandle<S> {
    /// Requests a stop and waits for the loop to drain.
    pub async fn stop(self) -> SamplerOutcome<S> {
        let _ = self.stop.send(true);
        self.task.await.expect("sampler task panicked")
    }

    /// Waits for the sampler to finish by itself (duration elapsed or abort).
    pub async fn join(self) -> SamplerOutcome<S> {
        self.task.await.expect("sampler task panicked")
    }

    pub fn is_finished(&self) -> bool {
        self.task.is_finished()
    }
}

/// Starts polling `client` every `interval_ms` on the client's clock.
///
/// Ticks are anchored to the start time; a tick that cannot be served in time
/// is skipped, which shows up as a gap. Samples whose device timestamp does
/// not advance past the previous one are dropped.
pub fn run_sampler<S: SampleSink>(
    client: PlugClient,
    config: SamplerConfig,
    sink: S,
) -> Result<SamplerHandle<S>, TelemetryError> {
    if config.interval_ms < MIN_INTERVAL_MS {
        return Err(TelemetryError::Precondition(format!(
            "interval_ms must be >= {MIN_INTERVAL_MS}, got {}",
            config.interval_ms
        )));
    }
    let (stop, stop_rx) = watch::channel(false);
    let task = tokio::spawn(sample_loop(client, config, sink, stop_rx));
    Ok(SamplerHandle { stop, task })
}

async fn sample_loop<S: SampleSink>(
    client: PlugClient,
    config: SamplerConfig,
    sink: S,
    mut stop_rx: watch::Receiver<bool>,
) -> SamplerOutcome<S> {
    let clock = client.clock().clone();
    let interval = config.interval_ms as i64;
    let start = clock.now_ms();
    let end = config.duration_ms.map(|d| start + d as i64);

    let mut out = SamplerOutcome {
        sink,
        polls: 0,
        samples: 0,
        failures: 0,
        max_gap_ms: 0,
        gaps: Vec::new(),
        abort: None,
    };
    let mut consecutive = 0u32;
    let mut last_ts: Option<i64> = None;
    let mut tick: i64 = 0;

    loop {
        let deadline = start + tick * interval;
        if end.is_some_and(|e| deadline >= e) || *stop_rx.borrow() {
            break;
        }
        tokio::select! {
            _ = stop_rx.changed() => break,
            _ = clock.sleep_until(deadline) => {}
        }
        out.polls += 1;
        match client.poll_status().await {
            Ok(sample) => {
                consecutive = 0;
                if last_ts.is_some_and(|prev| sample.ts_ms <= prev) {
                    tracing::debug!(ts_ms = sample.ts_ms, "dropping sample with non-advancing device timestamp");
                } else {
                    if let Some(prev) = last_ts {
                        let gap = sample.ts_ms - prev;
                        out.max_gap_ms = out.max_gap_ms.max(gap);
                        if 2 * gap > 3 * interval {
                            out.gaps.push(Gap { after_ts_ms: prev, gap_ms: gap });
                        }
                    }
                    if let Err(e) = out.sink.append(sample) {
                        out.abort = Some(format!("sink write failed: {e}"));
                        break;
                    }
                    out.samples += 1;
                    last_ts = Some(sample.ts_ms);
                }
            }
            Err(e) => {
                out.failures += 1;
                consecutive += 1;
                tracing::warn!(consecutive, "poll failed: {e}");
                if consecutive >= config.failure_limit {
                    out.abort = Some(format!("{consecutive} consecutive poll failures, last: {e}"));
                    break;
                }
            }
        }
        // skip ticks we have already overrun
        let now = clock.now_ms();
        tick = (tick + 1).max((now - start) / interval + i64::from((now - start) % interval != 0));
    }

    out
}
