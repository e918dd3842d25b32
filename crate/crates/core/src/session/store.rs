use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BaselineRecord, MeterSession, PhaseMarker, SessionError, MANIFEST_FILE, MARKERS_FILE, SAMPLES_FILE};
use crate::telemetry::{ClockOffset, PowerSample, SampleSink, DEFAULT_INTERVAL_MS};

#[derive(Serialize, Deserialize)]
struct Manifest {
    session_id: String,
    clock_offset: Option<ClockOffset>,
    baseline: Option<BaselineRecord>,
    #[serde(default)]
    annotations: BTreeMap<String, String>,
    #[serde(default)]
    epochs: Vec<usize>,
    #[serde(default = "default_interval")]
    interval_ms: u64,
}

fn default_interval() -> u64 {
    DEFAULT_INTERVAL_MS
}

impl Manifest {
    fn of(session: &MeterSession) -> Self {
        Self {
            session_id: session.session_id.clone(),
            clock_offset: session.clock_offset,
            baseline: session.baseline,
            annotations: session.annotations.clone(),
            epochs: session.epochs.clone(),
            interval_ms: session.interval_ms,
        }
    }
}

fn write_manifest(dir: &Path, session: &MeterSession) -> Result<(), SessionError> {
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&Manifest::of(session)).expect("manifest serializes");
    text.push('\n');
    // write-then-rename so a concurrent reader never sees a half manifest
    let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
    fs::write(&tmp, text).map_err(|e| SessionError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| SessionError::io(&path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), SessionError> {
    let file = File::create(path).map_err(|e| SessionError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serializes");
        w.write_all(b"\n").map_err(|e| SessionError::io(path, e))?;
    }
    w.flush().map_err(|e| SessionError::io(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path, file_name: &str) -> Result<Vec<T>, SessionError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(SessionError::io(path, e)),
    };
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| SessionError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| SessionError::Corrupt {
            file: file_name.into(),
            index: out.len(),
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Rewrites only `session.json`, leaving the sample and marker files to
/// whoever is appending to them.
pub fn save_manifest(session: &MeterSession, dir: &Path) -> Result<(), SessionError> {
    fs::create_dir_all(dir).map_err(|e| SessionError::io(dir, e))?;
    write_manifest(dir, session)
}

/// Writes `session.json`, `samples.jsonl` and `markers.jsonl` into `dir`.
pub fn save_session(session: &MeterSession, dir: &Path) -> Result<(), SessionError> {
    fs::create_dir_all(dir).map_err(|e| SessionError::io(dir, e))?;
    write_jsonl(&dir.join(SAMPLES_FILE), &session.samples)?;
    write_jsonl(&dir.join(MARKERS_FILE), &session.markers)?;
    write_manifest(dir, session)
}

/// Loads and validates a session directory. Markers are sorted by time, so
/// lines appended out of order by concurrent writers are tolerated.
pub fn load_session(dir: &Path) -> Result<MeterSession, SessionError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| SessionError::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| SessionError::Corrupt {
        file: MANIFEST_FILE.into(),
        index: 0,
        reason: e.to_string(),
    })?;
    let samples: Vec<PowerSample> = read_jsonl(&dir.join(SAMPLES_FILE), SAMPLES_FILE)?;
    let markers = read_markers(&dir.join(MARKERS_FILE))?;
    let session = MeterSession {
        session_id: manifest.session_id,
        samples,
        markers,
        baseline: manifest.baseline,
        clock_offset: manifest.clock_offset,
        annotations: manifest.annotations,
        epochs: manifest.epochs,
        interval_ms: manifest.interval_ms,
    };
    session.validate()?;
    Ok(session)
}

/// Reads a marker JSONL file, sorted stably by timestamp. A missing file
/// yields no markers.
pub fn read_markers(path: &Path) -> Result<Vec<PhaseMarker>, SessionError> {
    let mut markers: Vec<PhaseMarker> = read_jsonl(path, MARKERS_FILE)?;
    for (i, m) in markers.iter().enumerate() {
        if m.label.trim().is_empty() {
            return Err(SessionError::Corrupt { file: MARKERS_FILE.into(), index: i, reason: "empty label".into() });
        }
    }
    markers.sort_by_key(|m| m.ts_ms);
    Ok(markers)
}

/// Appends one marker line to `dir/markers.jsonl` with a single write, so
/// several processes can mark the same session.
pub fn append_marker_line(dir: &Path, marker: &PhaseMarker) -> Result<(), SessionError> {
    let path = dir.join(MARKERS_FILE);
    let mut line = serde_json::to_vec(marker).expect("marker serializes");
    line.push(b'\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| SessionError::io(&path, e))?;
    f.write_all(&line).map_err(|e| SessionError::io(&path, e))
}

/// Live writer used while metering: every sample goes to the in-memory
/// session and is appended to `samples.jsonl`; the manifest is rewritten when
/// a counter epoch opens.
pub struct SessionWriter {
    dir: PathBuf,
    session: MeterSession,
    samples: BufWriter<File>,
}

impl SessionWriter {
    /// Opens `dir` for appending. The directory's existing samples must
    /// already be in `session` (normally it was just loaded from `dir`).
    pub fn open(dir: &Path, session: MeterSession) -> Result<Self, SessionError> {
        fs::create_dir_all(dir).map_err(|e| SessionError::io(dir, e))?;
        let path = dir.join(SAMPLES_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| SessionError::io(&path, e))?;
        write_manifest(dir, &session)?;
        Ok(Self { dir: dir.to_path_buf(), session, samples: BufWriter::new(file) })
    }

    pub fn session(&self) -> &MeterSession {
        &self.session
    }

    pub fn append_sample(&mut self, sample: PowerSample) -> Result<(), SessionError> {
        let epochs_before = self.session.epochs.len();
        self.session.append_sample(sample)?;
        let path = self.dir.join(SAMPLES_FILE);
        let mut line = serde_json::to_vec(&sample).expect("sample serializes");
        line.push(b'\n');
        self.samples.write_all(&line).map_err(|e| SessionError::io(&path, e))?;
        self.samples.flush().map_err(|e| SessionError::io(&path, e))?;
        if self.session.epochs.len() != epochs_before {
            write_manifest(&self.dir, &self.session)?;
        }
        Ok(())
    }

    /// Flushes and rewrites the manifest; returns the in-memory session.
    pub fn finish(mut self) -> Result<MeterSession, SessionError> {
        let path = self.dir.join(SAMPLES_FILE);
        self.samples.flush().map_err(|e| SessionError::io(&path, e))?;
        write_manifest(&self.dir, &self.session)?;
        Ok(self.session)
    }
}

impl SampleSink for SessionWriter {
    fn append(&mut self, sample: PowerSample) -> Result<(), String> {
        self.append_sample(sample).map_err(|e| e.to_string())
    }
}
