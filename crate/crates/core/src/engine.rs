//! The ordered engine pipeline.
//!
//! One [`Pipeline`] owns detector and narrative state. Every input (chat,
//! clock advance, admin change) goes through it in order and comes back out
//! as freshly numbered [`LogRecord`]s, which the caller persists and fans out.
//! Nothing here reads a wall clock: time only moves when a message or an
//! explicit advance says so, so a replayed session reproduces its verdicts
//! and transitions exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierConfig, ConfigError, FilterUpdate};
use crate::detector::{DetectorConfig, DetectorConfigError, NegativityDetector, WindowVerdict};
use crate::ingest::{ChatMessage, IngestError, SourceConfig};
use crate::narrative::{
    EventKind, FsmConfig, FsmConfigError, FsmSignal, NarrativeMachine, PlotState, SignalKind,
};
use crate::session_log::{ConfigSnapshot, LogRecord, RecordBody, ReplayItem};

/// Longest accepted broadcast notice, in characters.
pub const MAX_NOTICE_CHARS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    #[default]
    #[serde(alias = "with_story")]
    WithStory,
    #[serde(alias = "without_story")]
    WithoutStory,
}

/// A live configuration change, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AdminChange {
    Threshold { value: f64 },
    Filter { update: FilterUpdate },
    Mode { mode: Mode },
    Viewers { count: u64 },
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AdminError {
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("notice text is empty")]
    EmptyNotice,
    #[error("notice is {len} chars, limit is {MAX_NOTICE_CHARS}")]
    NoticeTooLong { len: usize },
}

impl From<ConfigError> for AdminError {
    fn from(e: ConfigError) -> Self {
        AdminError::InvalidValue(e.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineConfigError {
    #[error(transparent)]
    Classifier(#[from] ConfigError),
    #[error(transparent)]
    Detector(#[from] DetectorConfigError),
    #[error(transparent)]
    Fsm(#[from] FsmConfigError),
    #[error(transparent)]
    Source(#[from] IngestError),
    #[error("detector.deescalate_windows ({detector}) and fsm.deescalate_windows ({fsm}) differ")]
    DeescalateMismatch { detector: u32, fsm: u32 },
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn default_viewers() -> u64 {
    10_000
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub fsm: FsmConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_viewers")]
    pub nominal_viewers: u64,
    #[serde(default = "default_listen")]
    pub listen_address: String,
    /// Shared secret expected in the `x-admin-token` header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admin_token: Option<String>,
    /// Accepted local-room tokens. Empty means the room is open.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub participant_tokens: Vec<String>,
    /// Optional TCP address for the newline-delimited JSON room socket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_address: Option<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            source: SourceConfig::default(),
            classifier: ClassifierConfig::default(),
            detector: DetectorConfig::default(),
            fsm: FsmConfig::default(),
            mode: Mode::WithStory,
            nominal_viewers: default_viewers(),
            listen_address: default_listen(),
            admin_token: None,
            participant_tokens: Vec::new(),
            room_address: None,
        }
    }
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self, EngineConfigError> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.classifier.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), EngineConfigError> {
        self.source.validate()?;
        self.classifier.validate()?;
        self.detector.validate()?;
        self.fsm.validate()?;
        if self.detector.deescalate_windows != self.fsm.deescalate_windows {
            return Err(EngineConfigError::DeescalateMismatch {
                detector: self.detector.deescalate_windows,
                fsm: self.fsm.deescalate_windows,
            });
        }
        Ok(())
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            classifier: self.classifier.clone(),
            detector: self.detector.clone(),
            fsm: self.fsm.clone(),
        }
    }
}

/// Point-in-time view of the engine, taken between two inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    /// `None` in without-story mode.
    pub plot: Option<PlotState>,
    pub window: Option<WindowVerdict>,
    pub mode: Mode,
    pub viewers: u64,
    pub now_ms: u64,
    pub last_seq: u64,
    pub configs: ConfigSnapshot,
}

/// What a connected client is told, before per-connection numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum UpdatePayload {
    State {
        t: u64,
        plot: Option<PlotState>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        event: Option<EventKind>,
    },
    Chat {
        t: u64,
        id: String,
        author: String,
        body: String,
        negative: bool,
    },
    Notice {
        t: u64,
        text: String,
    },
    Stats {
        t: u64,
        window: WindowVerdict,
    },
}

/// One WebSocket frame: `{"type":..., "seq":N, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub seq: u64,
    #[serde(flatten)]
    pub payload: UpdatePayload,
}

pub struct Pipeline {
    mode: Mode,
    configs: ConfigSnapshot,
    viewers: u64,
    detector: NegativityDetector,
    fsm: NarrativeMachine,
    last_seq: u64,
    now_ms: u64,
    next_boundary: u64,
    latest: Option<WindowVerdict>,
}

enum Due {
    Expel(u64),
    Boundary(u64),
}

impl Pipeline {
    pub fn new(configs: ConfigSnapshot, mode: Mode, viewers: u64) -> Self {
        let window = configs.detector.window_ms;
        Self {
            mode,
            viewers,
            detector: NegativityDetector::new(window),
            fsm: NarrativeMachine::new(),
            last_seq: 0,
            now_ms: 0,
            next_boundary: window,
            latest: None,
            configs,
        }
    }

    pub fn from_config(config: &EngineConfig) -> Self {
        Self::new(config.snapshot(), config.mode, config.nominal_viewers)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn plot(&self) -> Option<PlotState> {
        (self.mode == Mode::WithStory).then(|| self.fsm.state())
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            plot: self.plot(),
            window: self.latest.clone(),
            mode: self.mode,
            viewers: self.viewers,
            now_ms: self.now_ms,
            last_seq: self.last_seq,
            configs: self.configs.clone(),
        }
    }

    fn push(&mut self, out: &mut Vec<LogRecord>, timestamp_ms: u64, body: RecordBody) {
        self.last_seq += 1;
        out.push(LogRecord {
            seq: self.last_seq,
            timestamp_ms,
            body,
        });
    }

    fn signal(&mut self, out: &mut Vec<LogRecord>, kind: SignalKind, at_ms: u64) {
        if self.mode != Mode::WithStory {
            return;
        }
        for event in self
            .fsm
            .step(FsmSignal::new(kind, at_ms), &self.configs.fsm)
        {
            self.push(out, event.at_ms, RecordBody::Transition(event));
        }
    }

    fn next_due(&self) -> Due {
        let expel = match self.mode {
            Mode::WithStory => self.fsm.expel_deadline(&self.configs.fsm),
            Mode::WithoutStory => None,
        };
        match expel {
            Some(d) if d <= self.next_boundary => Due::Expel(d),
            _ => Due::Boundary(self.next_boundary),
        }
    }

    /// Runs every scheduled evaluation strictly before `limit` (or up to and
    /// including it when `inclusive`).
    fn run_due(&mut self, limit: u64, inclusive: bool, out: &mut Vec<LogRecord>) {
        loop {
            let due = self.next_due();
            let at = match due {
                Due::Expel(t) | Due::Boundary(t) => t,
            };
            if at > limit || (at == limit && !inclusive) {
                break;
            }
            // an expel deadline can lie in the past after a without-story stretch
            self.now_ms = self.now_ms.max(at);
            match due {
                Due::Expel(_) => self.signal(out, SignalKind::Tick, self.now_ms),
                Due::Boundary(t) => {
                    let verdict = self
                        .detector
                        .evaluate(t, self.viewers, &self.configs.detector);
                    let kind = if verdict.exceeded {
                        SignalKind::WindowExceeded
                    } else {
                        SignalKind::WindowBelow
                    };
                    self.latest = Some(verdict.clone());
                    self.push(out, t, RecordBody::Verdict(verdict));
                    self.signal(out, kind, t);
                    self.next_boundary += self.configs.detector.window_ms;
                }
            }
        }
    }

    /// Moves session time to `now_ms`, evaluating every window that closed before it.
    pub fn advance_to(&mut self, now_ms: u64) -> Vec<LogRecord> {
        let mut out = Vec::new();
        self.run_due(now_ms, false, &mut out);
        self.now_ms = self.now_ms.max(now_ms);
        out
    }

    /// Ends the session at `end_ms`, including a window closing exactly then.
    pub fn finish(&mut self, end_ms: u64) -> Vec<LogRecord> {
        let mut out = Vec::new();
        self.run_due(end_ms, true, &mut out);
        self.now_ms = self.now_ms.max(end_ms);
        out
    }

    /// classify → record → comment record → (story mode) heart signal.
    pub fn ingest(&mut self, mut message: ChatMessage) -> Vec<LogRecord> {
        let mut out = Vec::new();
        self.run_due(message.timestamp_ms, false, &mut out);
        if message.timestamp_ms < self.now_ms {
            log::warn!(
                "message {} at {} ms arrived after {} ms; clamping",
                message.id,
                message.timestamp_ms,
                self.now_ms
            );
            message.timestamp_ms = self.now_ms;
        }
        self.now_ms = message.timestamp_ms;
        let at = message.timestamp_ms;
        let classification = classifier::classify(&message, &self.configs.classifier);
        self.detector.record(&message, &classification);
        let negative = classification.is_negative();
        self.push(
            &mut out,
            at,
            RecordBody::Comment {
                message,
                classification,
            },
        );
        if !negative {
            self.signal(&mut out, SignalKind::NonNegativeComment, at);
        }
        out
    }

    pub fn apply_admin(&mut self, change: AdminChange) -> Result<Vec<LogRecord>, AdminError> {
        match &change {
            AdminChange::Threshold { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(AdminError::InvalidValue(format!("threshold {value}")));
                }
                self.configs.detector.threshold_per_10k = *value;
            }
            AdminChange::Filter { update } => {
                self.configs.classifier = self.configs.classifier.with_update(update)?;
            }
            AdminChange::Mode { mode } => self.mode = *mode,
            AdminChange::Viewers { count } => self.viewers = *count,
        }
        let mut out = Vec::new();
        let at = self.now_ms;
        self.push(&mut out, at, RecordBody::Admin(change));
        Ok(out)
    }

    pub fn set_threshold(&mut self, value: f64) -> Result<Vec<LogRecord>, AdminError> {
        self.apply_admin(AdminChange::Threshold { value })
    }

    pub fn set_filter(&mut self, update: FilterUpdate) -> Result<Vec<LogRecord>, AdminError> {
        self.apply_admin(AdminChange::Filter { update })
    }

    pub fn set_mode(&mut self, mode: Mode) -> Result<Vec<LogRecord>, AdminError> {
        self.apply_admin(AdminChange::Mode { mode })
    }

    pub fn set_viewers(&mut self, count: u64) -> Result<Vec<LogRecord>, AdminError> {
        self.apply_admin(AdminChange::Viewers { count })
    }

    pub fn notice(&mut self, text: &str) -> Result<Vec<LogRecord>, AdminError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(AdminError::EmptyNotice);
        }
        let len = text.chars().count();
        if len > MAX_NOTICE_CHARS {
            return Err(AdminError::NoticeTooLong { len });
        }
        let mut out = Vec::new();
        let at = self.now_ms;
        self.push(
            &mut out,
            at,
            RecordBody::Notice {
                text: text.to_owned(),
            },
        );
        Ok(out)
    }

    /// Feeds one replayed item, advancing time to its logged timestamp first.
    pub fn apply_replay(&mut self, item: ReplayItem) -> Vec<LogRecord> {
        match item {
            ReplayItem::Comment(m) => self.ingest(m),
            ReplayItem::Admin { at_ms, change } => {
                let mut out = self.advance_to(at_ms);
                match self.apply_admin(change) {
                    Ok(records) => out.extend(records),
                    Err(e) => log::warn!("skipping logged admin change: {e}"),
                }
                out
            }
        }
    }

    /// Client-facing view of a record just produced by this pipeline.
    pub fn payload_for(&self, record: &LogRecord) -> Option<UpdatePayload> {
        let t = record.timestamp_ms;
        match &record.body {
            RecordBody::Comment {
                message,
                classification,
            } => Some(UpdatePayload::Chat {
                t,
                id: message.id.clone(),
                author: message.author.clone(),
                body: message.body.clone(),
                negative: classification.is_negative(),
            }),
            RecordBody::Verdict(v) => Some(UpdatePayload::Stats {
                t,
                window: v.clone(),
            }),
            RecordBody::Transition(e) => Some(UpdatePayload::State {
                t,
                plot: Some(e.state),
                event: Some(e.kind),
            }),
            RecordBody::Admin(AdminChange::Mode { .. }) => Some(UpdatePayload::State {
                t,
                plot: self.plot(),
                event: None,
            }),
            RecordBody::Admin(_) => None,
            RecordBody::Notice { text } => Some(UpdatePayload::Notice {
                t,
                text: text.clone(),
            }),
        }
    }
}
