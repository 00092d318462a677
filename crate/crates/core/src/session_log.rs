//! Append-only session log in JSON Lines.
//!
//! Line 1 is the [`SessionManifest`]; every following line is one
//! [`LogRecord`]. Records carry a contiguous `seq` starting at 1 and
//! non-decreasing session timestamps. A sidecar `<session_id>.labels.jsonl`
//! may hold manual labels for analysis; it never feeds back into the engine.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassificationResult, ClassifierConfig};
use crate::detector::{DetectorConfig, WindowVerdict};
use crate::engine::{AdminChange, Mode};
use crate::ingest::{ChatMessage, Source};
use crate::narrative::{FsmConfig, NarrativeEvent};

/// Flush after this many unflushed records...
pub const FLUSH_EVERY_RECORDS: usize = 100;
/// ...or once this much time has passed since the last flush.
pub const FLUSH_EVERY: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub classifier: ClassifierConfig,
    pub detector: DetectorConfig,
    pub fsm: FsmConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub channel: String,
    pub nominal_viewers: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    /// RFC 3339 wall-clock start time.
    pub started_at: String,
    pub mode: Mode,
    pub configs: ConfigSnapshot,
    pub stream_meta: StreamMeta,
}

impl SessionManifest {
    pub fn file_name(&self) -> String {
        format!("{}.jsonl", self.session_id)
    }

    pub fn labels_file_name(&self) -> String {
        format!("{}.labels.jsonl", self.session_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Comment,
    Verdict,
    Transition,
    Admin,
    Notice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum RecordBody {
    Comment {
        message: ChatMessage,
        classification: ClassificationResult,
    },
    Verdict(WindowVerdict),
    Transition(NarrativeEvent),
    Admin(AdminChange),
    Notice {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub body: RecordBody,
}

impl LogRecord {
    pub fn kind(&self) -> RecordKind {
        match self.body {
            RecordBody::Comment { .. } => RecordKind::Comment,
            RecordBody::Verdict(_) => RecordKind::Verdict,
            RecordBody::Transition(_) => RecordKind::Transition,
            RecordBody::Admin(_) => RecordKind::Admin,
            RecordBody::Notice { .. } => RecordKind::Notice,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("timestamp went backwards: {got} ms after {last} ms")]
    TimestampRegression { last: u64, got: u64 },
    #[error("storage full")]
    StorageFull,
    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("missing session manifest")]
    MissingManifest,
    #[error("replay speed must be a positive finite number, got {0}")]
    InvalidSpeed(f64),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for LogError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::StorageFull {
            LogError::StorageFull
        } else {
            LogError::Io(e)
        }
    }
}

/// Single writer for one session.
pub struct SessionWriter<W: Write> {
    out: W,
    last_seq: u64,
    last_ms: u64,
    unflushed: usize,
    last_flush: Instant,
    path: Option<PathBuf>,
}

impl SessionWriter<BufWriter<File>> {
    /// Creates `<dir>/<session_id>.jsonl` and writes the manifest line.
    pub fn create(dir: impl AsRef<Path>, manifest: &SessionManifest) -> Result<Self, LogError> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(manifest.file_name());
        let file = File::create(&path)?;
        let mut writer = Self::new(BufWriter::new(file), manifest)?;
        writer.path = Some(path);
        Ok(writer)
    }
}

impl<W: Write> SessionWriter<W> {
    pub fn new(mut out: W, manifest: &SessionManifest) -> Result<Self, LogError> {
        serde_json::to_writer(&mut out, manifest).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self {
            out,
            last_seq: 0,
            last_ms: 0,
            unflushed: 0,
            last_flush: Instant::now(),
            path: None,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), LogError> {
        let expected = self.last_seq + 1;
        if record.seq != expected {
            return Err(LogError::SequenceGap {
                expected,
                got: record.seq,
            });
        }
        if record.timestamp_ms < self.last_ms {
            return Err(LogError::TimestampRegression {
                last: self.last_ms,
                got: record.timestamp_ms,
            });
        }
        let mut line = serde_json::to_vec(record).map_err(io::Error::from)?;
        line.push(b'\n');
        self.out.write_all(&line)?;
        self.last_seq = record.seq;
        self.last_ms = record.timestamp_ms;
        self.unflushed += 1;
        if self.unflushed >= FLUSH_EVERY_RECORDS || self.last_flush.elapsed() >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    /// Flushes when records have been sitting in the buffer for too long.
    /// Call periodically on quiet streams.
    pub fn flush_if_due(&mut self) -> Result<(), LogError> {
        if self.unflushed > 0 && self.last_flush.elapsed() >= FLUSH_EVERY {
            self.flush()?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        self.out.flush()?;
        self.unflushed = 0;
        self.last_flush = Instant::now();
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W, LogError> {
        self.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSession {
    pub manifest: SessionManifest,
    pub records: Vec<LogRecord>,
}

impl LoadedSession {
    /// Timestamp of the last record, or 0 for an empty session.
    pub fn end_ms(&self) -> u64 {
        self.records.last().map_or(0, |r| r.timestamp_ms)
    }
}

/// Where reading stopped in a damaged log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub line: usize,
    pub reason: String,
}

/// Reads as much of a session as is intact. Everything before the first bad
/// line is returned along with the location of the damage.
pub fn recover_from<R: BufRead>(
    reader: R,
) -> Result<(LoadedSession, Option<Corruption>), LogError> {
    let mut lines = reader.lines().enumerate();
    let manifest = loop {
        match lines.next() {
            None => return Err(LogError::MissingManifest),
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str::<SessionManifest>(&line)
                    .map_err(|_| LogError::MissingManifest)?;
            }
        }
    };

    let mut records: Vec<LogRecord> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| Corruption {
            line: line_no,
            reason,
        };
        let record: LogRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                let session = LoadedSession { manifest, records };
                return Ok((session, Some(corrupt(e.to_string()))));
            }
        };
        if let Some(prev) = records.last() {
            let problem = if record.seq <= prev.seq {
                Some(format!("seq {} does not follow {}", record.seq, prev.seq))
            } else if record.timestamp_ms < prev.timestamp_ms {
                Some(format!(
                    "timestamp {} before {}",
                    record.timestamp_ms, prev.timestamp_ms
                ))
            } else {
                None
            };
            if let Some(reason) = problem {
                let session = LoadedSession { manifest, records };
                return Ok((session, Some(corrupt(reason))));
            }
        }
        records.push(record);
    }
    Ok((LoadedSession { manifest, records }, None))
}

pub fn recover(path: impl AsRef<Path>) -> Result<(LoadedSession, Option<Corruption>), LogError> {
    recover_from(BufReader::new(File::open(path)?))
}

pub fn load_from<R: BufRead>(reader: R) -> Result<LoadedSession, LogError> {
    match recover_from(reader)? {
        (session, None) => Ok(session),
        (_, Some(c)) => Err(LogError::CorruptRecord {
            line: c.line,
            reason: c.reason,
        }),
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<LoadedSession, LogError> {
    load_from(BufReader::new(File::open(path)?))
}

/// What a replay hands back to the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplayItem {
    Comment(ChatMessage),
    /// A logged config change, re-applied at its original session time.
    Admin {
        at_ms: u64,
        change: AdminChange,
    },
}

impl ReplayItem {
    pub fn at_ms(&self) -> u64 {
        match self {
            ReplayItem::Comment(m) => m.timestamp_ms,
            ReplayItem::Admin { at_ms, .. } => *at_ms,
        }
    }
}

/// The records a replay re-emits, in log order. Verdicts and transitions are
/// left out: the engine recomputes them.
pub fn replay_items(records: &[LogRecord]) -> Vec<ReplayItem> {
    records
        .iter()
        .filter_map(|r| match &r.body {
            RecordBody::Comment { message, .. } => {
                let mut m = message.clone();
                m.source = Source::Replay;
                Some(ReplayItem::Comment(m))
            }
            RecordBody::Admin(change) => Some(ReplayItem::Admin {
                at_ms: r.timestamp_ms,
                change: change.clone(),
            }),
            _ => None,
        })
        .collect()
}

/// Wall-clock offset from replay start at which an item logged at `at_ms` is due.
pub fn replay_offset(at_ms: u64, speed: f64) -> Duration {
    Duration::from_secs_f64(at_ms as f64 / 1000.0 / speed)
}

pub fn check_speed(speed: f64) -> Result<(), LogError> {
    if speed.is_finite() && speed > 0.0 {
        Ok(())
    } else {
        Err(LogError::InvalidSpeed(speed))
    }
}

/// Replays on the calling thread, sleeping so that gaps between items are
/// the logged gaps divided by `speed`. Items carry their logged session
/// timestamps, so anything computed from them is independent of `speed`.
pub fn replay(
    records: &[LogRecord],
    speed: f64,
    mut sink: impl FnMut(ReplayItem),
) -> Result<(), LogError> {
    check_speed(speed)?;
    let start = Instant::now();
    for item in replay_items(records) {
        let due = start + replay_offset(item.at_ms(), speed);
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        sink(item);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManualLabel {
    Prosocial,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLine {
    pub id: String,
    pub label: ManualLabel,
}

/// Post-hoc manual labels keyed by message id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelOverlay {
    labels: HashMap<String, ManualLabel>,
}

impl LabelOverlay {
    pub fn get(&self, id: &str) -> Option<ManualLabel> {
        self.labels.get(id).copied()
    }

    pub fn insert(&mut self, id: impl Into<String>, label: ManualLabel) {
        self.labels.insert(id.into(), label);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, LogError> {
        let mut overlay = Self::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LabelLine =
                serde_json::from_str(&line).map_err(|e| LogError::CorruptRecord {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            overlay.insert(entry.id, entry.label);
        }
        Ok(overlay)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Writes one `{id, label}` line per entry, sorted by id.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        let mut entries: Vec<_> = self.labels.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        for (id, label) in entries {
            let line = LabelLine {
                id: id.clone(),
                label: *label,
            };
            serde_json::to_writer(&mut out, &line).map_err(io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl FromIterator<(String, ManualLabel)> for LabelOverlay {
    fn from_iter<I: IntoIterator<Item = (String, ManualLabel)>>(iter: I) -> Self {
        Self {
            labels: iter.into_iter().collect(),
        }
    }
}
