use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceMode {
    IrcLive,
    LocalRoom,
    ReplayFile,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub mode: SourceMode,
    /// `host:port` for IRC, a file path for replays.
    #[serde(default)]
    pub endpoint: String,
    #[serde(default)]
    pub channel: String,
    /// IRC `PASS` token. Anonymous read-only login when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credentials: Option<String>,
    /// IRC nick; must match the account behind `credentials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nick: Option<String>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mode: SourceMode::LocalRoom,
            endpoint: String::new(),
            channel: "storychat".into(),
            credentials: None,
            nick: None,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let needs_endpoint = matches!(self.mode, SourceMode::IrcLive | SourceMode::ReplayFile);
        if needs_endpoint && self.endpoint.trim().is_empty() {
            return Err(IngestError::InvalidSource(format!(
                "{:?} requires a non-empty endpoint",
                self.mode
            )));
        }
        Ok(())
    }

    /// Replays never reconnect; a live IRC feed does.
    pub fn reconnects(&self) -> bool {
        self.mode == SourceMode::IrcLive
    }
}

/// Exponential reconnect delay: 1s, 2s, 4s, ... capped at 60s.
#[derive(Debug, Clone)]
pub struct Backoff {
    attempt: u32,
    initial: Duration,
    cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self::new(Duration::from_secs(1), Duration::from_secs(60))
    }
}

impl Backoff {
    pub fn new(initial: Duration, cap: Duration) -> Self {
        Self {
            attempt: 0,
            initial,
            cap,
        }
    }

    pub fn next_delay(&mut self) -> Duration {
        let factor = 1u32.checked_shl(self.attempt.min(31)).unwrap_or(u32::MAX);
        self.attempt = self.attempt.saturating_add(1);
        self.initial.saturating_mul(factor).min(self.cap)
    }

    pub fn reset(&mut self) {
        self.attempt = 0;
    }
}

/// One line of the local participant room protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomPost {
    pub author: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

pub fn parse_room_line(line: &str) -> Result<RoomPost, IngestError> {
    serde_json::from_str(line.trim()).map_err(|e| IngestError::MalformedRoomPost(e.to_string()))
}
