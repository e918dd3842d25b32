//! Measurement sessions: samples, phase markers, idle baseline and clock
//! offset, with counter-epoch tracking.

mod store;

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::telemetry::{ClockOffset, PowerSample, SampleSink, DEFAULT_INTERVAL_MS};

pub use store::{append_marker_line, load_session, read_markers, save_manifest, save_session, SessionWriter};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const MARKERS_FILE: &str = "markers.jsonl";
pub const MANIFEST_FILE: &str = "session.json";

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("sample {index}: timestamp {ts_ms} does not advance past {prev_ms}")]
    Ordering { index: usize, ts_ms: i64, prev_ms: i64 },
    #[error("corrupt session ({file}, record {index}): {reason}")]
    Corrupt { file: String, index: usize, reason: String },
    #[error("marker pairing error for label `{label}`: {reason}")]
    Pairing { label: String, reason: String },
    #[error("invalid marker: {0}")]
    InvalidMarker(String),
    #[error("invalid baseline: {0}")]
    InvalidBaseline(String),
    #[error("offset correction requested but the session has no clock offset")]
    MissingClockOffset,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl SessionError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SessionError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    Begin,
    End,
}

impl std::str::FromStr for MarkerKind {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "begin" => Ok(MarkerKind::Begin),
            "end" => Ok(MarkerKind::End),
            other => Err(SessionError::InvalidMarker(format!("kind must be begin or end, got `{other}`"))),
        }
    }
}

/// A begin/end event stamped with host time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMarker {
    pub ts_ms: i64,
    pub label: String,
    pub kind: MarkerKind,
}

impl PhaseMarker {
    pub fn new(ts_ms: i64, label: impl Into<String>, kind: MarkerKind) -> Result<Self, SessionError> {
        let m = Self { ts_ms, label: label.into(), kind };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), SessionError> {
        if self.label.trim().is_empty() {
            return Err(SessionError::InvalidMarker("label must not be empty".into()));
        }
        Ok(())
    }
}

/// A labeled interval on the device clock.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub label: String,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl Phase {
    pub fn duration_ms(&self) -> i64 {
        self.end_ms - self.start_ms
    }
}

/// Idle power of the metered machine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub mean_w: f64,
    pub stddev_w: f64,
    pub window_ms: i64,
    pub sample_count: usize,
}

impl BaselineRecord {
    /// Mean and sample standard deviation of instantaneous power.
    pub fn from_samples(samples: &[PowerSample]) -> Result<Self, SessionError> {
        if samples.len() < 2 {
            return Err(SessionError::InvalidBaseline(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.watts).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.watts - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean_w: mean,
            stddev_w: var.sqrt(),
            window_ms: samples[samples.len() - 1].ts_ms - samples[0].ts_ms,
            sample_count: samples.len(),
        })
    }

    fn validate(&self) -> Result<(), SessionError> {
        let ok = self.mean_w.is_finite()
            && self.mean_w >= 0.0
            && self.stddev_w.is_finite()
            && self.stddev_w >= 0.0
            && self.sample_count >= 2;
        if ok {
            Ok(())
        } else {
            Err(SessionError::InvalidBaseline(format!("{self:?}")))
        }
    }
}

/// A recorded measurement run.
#[derive(Clone, Debug, PartialEq)]
pub struct MeterSession {
    pub session_id: String,
    pub samples: Vec<PowerSample>,
    /// Sorted by `ts_ms`; equal timestamps keep arrival order.
    pub markers: Vec<PhaseMarker>,
    pub baseline: Option<BaselineRecord>,
    pub clock_offset: Option<ClockOffset>,
    pub annotations: BTreeMap<String, String>,
    /// Indices of samples that open a new counter epoch (never 0).
    pub epochs: Vec<usize>,
    /// Nominal sampling interval; also the marker tolerance band.
    pub interval_ms: u64,
}

impl MeterSession {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            samples: Vec::new(),
            markers: Vec::new(),
            baseline: None,
            clock_offset: None,
            annotations: BTreeMap::new(),
            epochs: Vec::new(),
            interval_ms: DEFAULT_INTERVAL_MS,
        }
    }

    /// Appends a sample. A counter that goes backwards opens a new epoch.
    pub fn append_sample(&mut self, sample: PowerSample) -> Result<(), SessionError> {
        self.push_sample(sample, false)
    }

    /// Appends a sample that starts a new counter epoch regardless of its value.
    pub fn append_sample_with_reset(&mut self, sample: PowerSample) -> Result<(), SessionError> {
        self.push_sample(sample, true)
    }

    fn push_sample(&mut self, sample: PowerSample, reset: bool) -> Result<(), SessionError> {
        let index = self.samples.len();
        if !(sample.watts.is_finite() && sample.watts >= 0.0 && sample.wh_total.is_finite() && sample.wh_total >= 0.0) {
            return Err(SessionError::Corrupt {
                file: SAMPLES_FILE.into(),
                index,
                reason: "watts and wh_total must be finite and nonnegative".into(),
            });
        }
        if let Some(prev) = self.samples.last() {
            if sample.ts_ms <= prev.ts_ms {
                return Err(SessionError::Ordering { index, ts_ms: sample.ts_ms, prev_ms: prev.ts_ms });
            }
            if reset || sample.wh_total < prev.wh_total {
                self.epochs.push(index);
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Sample index ranges of each counter epoch.
    pub fn epoch_ranges(&self) -> Vec<Range<usize>> {
        if self.samples.is_empty() {
            return Vec::new();
        }
        let mut bounds = Vec::with_capacity(self.epochs.len() + 2);
        bounds.push(0);
        bounds.extend(self.epochs.iter().copied());
        bounds.push(self.samples.len());
        bounds.windows(2).map(|w| w[0]..w[1]).collect()
    }

    pub fn add_marker(&mut self, marker: PhaseMarker) -> Result<(), SessionError> {
        marker.validate()?;
        let pos = self.markers.partition_point(|m| m.ts_ms <= marker.ts_ms);
        self.markers.insert(pos, marker);
        Ok(())
    }

    /// Reads a marker JSONL file (live `mark` output or converted experiment
    /// logs) and adds every record. Returns the number added.
    pub fn ingest_markers(&mut self, path: &Path) -> Result<usize, SessionError> {
        let markers = read_markers(path)?;
        let n = markers.len();
        for m in markers {
            self.add_marker(m)?;
        }
        Ok(n)
    }

    pub fn set_baseline(&mut self, baseline: BaselineRecord) -> Result<(), SessionError> {
        baseline.validate()?;
        self.baseline = Some(baseline);
        Ok(())
    }

    /// Pairs begin/end markers per label, in time order.
    ///
    /// With `correct_offset`, host marker times are moved onto the device
    /// clock: `device = host + offset_ms` (rounded to whole ms).
    pub fn phases(&self, correct_offset: bool) -> Result<Vec<Phase>, SessionError> {
        let shift = if correct_offset {
            let off = self.clock_offset.ok_or(SessionError::MissingClockOffset)?;
            off.offset_ms.round() as i64
        } else {
            0
        };
        let mut open: BTreeMap<&str, i64> = BTreeMap::new();
        let mut phases = Vec::new();
        for m in &self.markers {
            match m.kind {
                MarkerKind::Begin => {
                    if let Some(start) = open.insert(&m.label, m.ts_ms) {
                        return Err(SessionError::Pairing {
                            label: m.label.clone(),
                            reason: format!("begin at {} while the phase opened at {start} is still running", m.ts_ms),
                        });
                    }
                }
                MarkerKind::End => {
                    let start = open.remove(m.label.as_str()).ok_or_else(|| SessionError::Pairing {
                        label: m.label.clone(),
                        reason: format!("end at {} without a preceding begin", m.ts_ms),
                    })?;
                    phases.push(Phase { label: m.label.clone(), start_ms: start + shift, end_ms: m.ts_ms + shift });
                }
            }
        }
        if let Some((label, start)) = open.into_iter().next() {
            return Err(SessionError::Pairing {
                label: label.to_string(),
                reason: format!("begin at {start} has no matching end"),
            });
        }
        phases.sort_by(|a, b| (a.start_ms, a.end_ms, &a.label).cmp(&(b.start_ms, b.end_ms, &b.label)));
        Ok(phases)
    }

    /// Checks every stored invariant, reporting the first offending record.
    pub fn validate(&self) -> Result<(), SessionError> {
        let corrupt = |file: &str, index: usize, reason: String| SessionError::Corrupt { file: file.into(), index, reason };
        for (k, &b) in self.epochs.iter().enumerate() {
            let increasing = k == 0 || self.epochs[k - 1] < b;
            if b == 0 || b >= self.samples.len() || !increasing {
                return Err(corrupt(MANIFEST_FILE, k, "epoch boundaries must be increasing sample indices in (0, n)".into()));
            }
        }
        let mut boundaries = self.epochs.iter().copied().peekable();
        for (i, s) in self.samples.iter().enumerate() {
            if !(s.watts.is_finite() && s.watts >= 0.0 && s.wh_total.is_finite() && s.wh_total >= 0.0) {
                return Err(corrupt(SAMPLES_FILE, i, "watts and wh_total must be finite and nonnegative".into()));
            }
            let at_boundary = boundaries.peek() == Some(&i);
            if at_boundary {
                boundaries.next();
            }
            if i > 0 {
                let prev = &self.samples[i - 1];
                if s.ts_ms <= prev.ts_ms {
                    return Err(corrupt(SAMPLES_FILE, i, format!("timestamp {} not after {}", s.ts_ms, prev.ts_ms)));
                }
                if s.wh_total < prev.wh_total && !at_boundary {
                    return Err(corrupt(SAMPLES_FILE, i, "energy counter decreased outside a recorded epoch boundary".into()));
                }
            }
        }
        for (i, m) in self.markers.iter().enumerate() {
            if m.label.trim().is_empty() {
                return Err(corrupt(MARKERS_FILE, i, "empty label".into()));
            }
        }
        if let Some(b) = &self.baseline {
            b.validate()?;
        }
        if let Some(o) = &self.clock_offset {
            if !(o.offset_ms.is_finite() && o.rtt_ms.is_finite() && o.rtt_ms >= 0.0) {
                return Err(corrupt(MANIFEST_FILE, 0, "clock offset must be finite with rtt >= 0".into()));
            }
        }
        Ok(())
    }
}

impl SampleSink for MeterSession {
    fn append(&mut self, sample: PowerSample) -> Result<(), String> {
        self.append_sample(sample).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ts: i64, wh: f64) -> PowerSample {
        PowerSample { ts_ms: ts, watts: 10.0, wh_total: wh }
    }

    #[test]
    fn growing_counter_stays_in_one_epoch() {
        let mut sess = MeterSession::new("a");
        sess.append_sample(s(0, 5.0)).unwrap();
        sess.append_sample(s(500, 5.2)).unwrap();
        assert!(sess.epochs.is_empty());
        assert_eq!(sess.epoch_ranges(), vec![0..2]);
    }

    #[test]
    fn counter_decrease_opens_epoch() {
        let mut sess = MeterSession::new("a");
        sess.append_sample(s(0, 5.2)).unwrap();
        sess.append_sample(s(500, 0.1)).unwrap();
        assert_eq!(sess.epochs, vec![1]);
        assert_eq!(sess.epoch_ranges(), vec![0..1, 1..2]);
    }

    #[test]
    fn declared_reset_opens_epoch() {
        let mut sess = MeterSession::new("a");
        sess.append_sample(s(0, 1.0)).unwrap();
        sess.append_sample_with_reset(s(500, 2.0)).unwrap();
        assert_eq!(sess.epochs, vec![1]);
    }

    #[test]
    fn equal_timestamp_is_ordering_error() {
        let mut sess = MeterSession::new("a");
        sess.append_sample(s(100, 1.0)).unwrap();
        assert!(matches!(sess.append_sample(s(100, 1.1)), Err(SessionError::Ordering { index: 1, .. })));
        assert_eq!(sess.samples.len(), 1);
    }

    fn marker(ts: i64, label: &str, kind: MarkerKind) -> PhaseMarker {
        PhaseMarker::new(ts, label, kind).unwrap()
    }

    #[test]
    fn begin_end_pair_becomes_phase() {
        let mut sess = MeterSession::new("a");
        sess.add_marker(marker(1000, "training", MarkerKind::Begin)).unwrap();
        sess.add_marker(marker(5000, "training", MarkerKind::End)).unwrap();
        sess.clock_offset = Some(ClockOffset { offset_ms: 0.0, rtt_ms: 0.0 });
        assert_eq!(sess.phases(true).unwrap(), vec![Phase { label: "training".into(), start_ms: 1000, end_ms: 5000 }]);
    }

    #[test]
    fn device_ahead_shifts_markers_forward() {
        let mut sess = MeterSession::new("a");
        sess.add_marker(marker(1000, "training", MarkerKind::Begin)).unwrap();
        sess.add_marker(marker(5000, "training", MarkerKind::End)).unwrap();
        sess.clock_offset = Some(ClockOffset { offset_ms: 200.0, rtt_ms: 4.0 });
        let p = &sess.phases(true).unwrap()[0];
        assert_eq!((p.start_ms, p.end_ms), (1200, 5200));
        assert_eq!(p.duration_ms(), 4000);
    }

    #[test]
    fn correction_without_offset_fails() {
        let sess = MeterSession::new("a");
        assert!(matches!(sess.phases(true), Err(SessionError::MissingClockOffset)));
    }

    #[test]
    fn end_before_begin_is_pairing_error() {
        let mut sess = MeterSession::new("a");
        sess.add_marker(marker(900, "training", MarkerKind::End)).unwrap();
        sess.add_marker(marker(1000, "training", MarkerKind::Begin)).unwrap();
        match sess.phases(false) {
            Err(SessionError::Pairing { label, .. }) => assert_eq!(label, "training"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_same_label_is_pairing_error() {
        let mut sess = MeterSession::new("a");
        sess.add_marker(marker(0, "eval", MarkerKind::Begin)).unwrap();
        sess.add_marker(marker(10, "eval", MarkerKind::Begin)).unwrap();
        sess.add_marker(marker(20, "eval", MarkerKind::End)).unwrap();
        assert!(matches!(sess.phases(false), Err(SessionError::Pairing { .. })));
    }

    #[test]
    fn interleaved_labels_pair_independently() {
        let mut sess = MeterSession::new("a");
        for (ts, l, k) in [
            (0, "run", MarkerKind::Begin),
            (10, "training", MarkerKind::Begin),
            (50, "training", MarkerKind::End),
            (50, "prediction", MarkerKind::Begin),
            (80, "prediction", MarkerKind::End),
            (90, "run", MarkerKind::End),
        ] {
            sess.add_marker(marker(ts, l, k)).unwrap();
        }
        let labels: Vec<_> = sess.phases(false).unwrap().into_iter().map(|p| p.label).collect();
        assert_eq!(labels, ["run", "training", "prediction"]);
    }

    #[test]
    fn markers_are_kept_sorted() {
        let mut sess = MeterSession::new("a");
        sess.add_marker(marker(50, "x", MarkerKind::End)).unwrap();
        sess.add_marker(marker(10, "x", MarkerKind::Begin)).unwrap();
        assert_eq!(sess.markers[0].ts_ms, 10);
        assert!(sess.phases(false).is_ok());
    }

    #[test]
    fn empty_label_rejected() {
        assert!(PhaseMarker::new(0, "  ", MarkerKind::Begin).is_err());
    }

    #[test]
    fn baseline_of_constant_power_has_zero_spread() {
        let samples: Vec<_> = (0..10).map(|i| PowerSample { ts_ms: i * 500, watts: 116.0, wh_total: 0.0 }).collect();
        let b = BaselineRecord::from_samples(&samples).unwrap();
        assert_eq!(b.mean_w, 116.0);
        assert_eq!(b.stddev_w, 0.0);
        assert_eq!(b.window_ms, 4500);
        assert_eq!(b.sample_count, 10);
        assert!(BaselineRecord::from_samples(&samples[..1]).is_err());
    }

    #[test]
    fn baseline_uses_sample_standard_deviation() {
        let samples: Vec<_> = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]
            .iter()
            .enumerate()
            .map(|(i, &w)| PowerSample { ts_ms: i as i64, watts: w, wh_total: 0.0 })
            .collect();
        let b = BaselineRecord::from_samples(&samples).unwrap();
        assert_eq!(b.mean_w, 5.0);
        assert!((b.stddev_w - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn validate_flags_undeclared_reset() {
        let mut sess = MeterSession::new("a");
        sess.samples = vec![s(0, 2.0), s(1, 3.0), s(2, 1.0)];
        match sess.validate() {
            Err(SessionError::Corrupt { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        sess.epochs = vec![2];
        sess.validate().unwrap();
    }
}
