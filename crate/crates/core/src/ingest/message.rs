use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Where a chat message entered the engine.
///
/// The declaration order is the merge tie-break rank: at equal timestamps a
/// participant message sorts before an external one, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Participant,
    External,
    Replay,
    Synthetic,
}

impl Source {
    pub fn rank(self) -> u8 {
        self as u8
    }

    fn id_prefix(self) -> &'static str {
        match self {
            Source::Participant => "par",
            Source::External => "ext",
            Source::Replay => "rep",
            Source::Synthetic => "sim",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::Participant => "participant",
            Source::External => "external",
            Source::Replay => "replay",
            Source::Synthetic => "synthetic",
        };
        f.write_str(s)
    }
}

/// One normalized chat event, whatever its origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub id: String,
    pub channel: String,
    pub author: String,
    pub body: String,
    /// Milliseconds since session start.
    pub timestamp_ms: u64,
    pub source: Source,
}

impl ChatMessage {
    /// Builds a message, trimming the body. Returns `None` when nothing is left.
    pub fn new(
        id: impl Into<String>,
        channel: impl Into<String>,
        author: impl Into<String>,
        body: &str,
        timestamp_ms: u64,
        source: Source,
    ) -> Option<Self> {
        let body = body.trim();
        if body.is_empty() {
            return None;
        }
        Some(Self {
            id: id.into(),
            channel: channel.into(),
            author: author.into(),
            body: body.to_owned(),
            timestamp_ms,
            source,
        })
    }

    /// Merge ordering key: timestamp, then source rank, then id.
    pub fn order_key(&self) -> (u64, u8, &str) {
        (self.timestamp_ms, self.source.rank(), &self.id)
    }
}

/// Session-relative time source shared by every ingestion path.
///
/// A wall clock measures from its construction; a manual clock only moves
/// when told to, which is what tests and logical-time replays use. Both hand
/// out session-unique message ids.
#[derive(Debug)]
pub struct SessionClock {
    start: Option<Instant>,
    manual_ms: AtomicU64,
    next_id: AtomicU64,
}

impl SessionClock {
    pub fn wall() -> Self {
        Self {
            start: Some(Instant::now()),
            manual_ms: AtomicU64::new(0),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn manual(start_ms: u64) -> Self {
        Self {
            start: None,
            manual_ms: AtomicU64::new(start_ms),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn now_ms(&self) -> u64 {
        match self.start {
            Some(start) => start.elapsed().as_millis() as u64,
            None => self.manual_ms.load(Ordering::Acquire),
        }
    }

    /// Moves a manual clock forward. Never moves backwards; no-op on a wall clock.
    pub fn advance_to(&self, ms: u64) {
        self.manual_ms.fetch_max(ms, Ordering::AcqRel);
    }

    pub fn next_message_id(&self, source: Source) -> String {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed);
        format!("{}-{:08}", source.id_prefix(), n)
    }
}
