//! Batch measurements over recorded sessions.
//!
//! Negative labels come from the logged classifier results. Prosocial labels
//! only exist when a manual label overlay is supplied; an overlay can mark a
//! non-negative message prosocial but never overrides a negative verdict.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::Mode;
use crate::ingest::{ChatMessage, Source};
use crate::narrative::{EventKind, PlotState};
use crate::par::{self, Exec};
use crate::session_log::{LabelOverlay, LoadedSession, LogRecord, ManualLabel, RecordBody};

pub const DEFAULT_SURGE_HORIZON_MS: u64 = 10_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnalyticsError {
    #[error("label overlay references ids not in the log: {0:?}")]
    OverlayIdMismatch(Vec<String>),
    #[error("session was not recorded in with-story mode")]
    NotWithStory,
    #[error("no {0} entries in the session")]
    NoSuchEvent(PlotState),
    #[error("a label overlay is required")]
    MissingOverlay,
    #[error("no prosocial comments before {entries} {state} entries but {after_total} after; percentage change is undefined")]
    ZeroBaseline {
        state: PlotState,
        entries: usize,
        after_total: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommentLabel {
    Negative,
    Neutral,
    Prosocial,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub total: u64,
    pub negative: u64,
    pub neutral: u64,
    /// Only present when an overlay was supplied.
    pub prosocial: Option<u64>,
}

impl LabelCounts {
    fn add(&mut self, label: CommentLabel, with_overlay: bool) {
        self.total += 1;
        match label {
            CommentLabel::Negative => self.negative += 1,
            CommentLabel::Neutral => self.neutral += 1,
            CommentLabel::Prosocial => *self.prosocial.get_or_insert(0) += 1,
        }
        if with_overlay {
            self.prosocial.get_or_insert(0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinuteBucket {
    pub minute: u64,
    pub total: u64,
    pub negative: u64,
    pub prosocial: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStats {
    #[serde(flatten)]
    pub counts: LabelCounts,
    pub by_source: BTreeMap<String, LabelCounts>,
    pub per_minute: Vec<MinuteBucket>,
}

fn comments(records: &[LogRecord]) -> impl Iterator<Item = (&ChatMessage, bool)> {
    records.iter().filter_map(|r| match &r.body {
        RecordBody::Comment {
            message,
            classification,
        } => Some((message, classification.is_negative())),
        _ => None,
    })
}

fn label_of(message: &ChatMessage, negative: bool, overlay: Option<&LabelOverlay>) -> CommentLabel {
    if negative {
        CommentLabel::Negative
    } else if overlay.and_then(|o| o.get(&message.id)) == Some(ManualLabel::Prosocial) {
        CommentLabel::Prosocial
    } else {
        CommentLabel::Neutral
    }
}

fn check_overlay(records: &[LogRecord], overlay: &LabelOverlay) -> Result<(), AnalyticsError> {
    let ids: BTreeSet<&str> = comments(records).map(|(m, _)| m.id.as_str()).collect();
    let mut unknown: Vec<String> = overlay
        .ids()
        .filter(|id| !ids.contains(id))
        .map(str::to_owned)
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        unknown.sort();
        Err(AnalyticsError::OverlayIdMismatch(unknown))
    }
}

pub fn session_stats(
    records: &[LogRecord],
    overlay: Option<&LabelOverlay>,
) -> Result<SessionStats, AnalyticsError> {
    if let Some(o) = overlay {
        check_overlay(records, o)?;
    }
    let with_overlay = overlay.is_some();
    let mut counts = LabelCounts {
        prosocial: with_overlay.then_some(0),
        ..Default::default()
    };
    let mut by_source: BTreeMap<String, LabelCounts> = BTreeMap::new();
    let mut minutes: BTreeMap<u64, MinuteBucket> = BTreeMap::new();

    for (message, negative) in comments(records) {
        let label = label_of(message, negative, overlay);
        counts.add(label, with_overlay);
        by_source
            .entry(message.source.to_string())
            .or_default()
            .add(label, with_overlay);
        let minute = message.timestamp_ms / 60_000;
        let bucket = minutes.entry(minute).or_insert_with(|| MinuteBucket {
            minute,
            total: 0,
            negative: 0,
            prosocial: with_overlay.then_some(0),
        });
        bucket.total += 1;
        bucket.negative += (label == CommentLabel::Negative) as u64;
        if label == CommentLabel::Prosocial {
            *bucket.prosocial.get_or_insert(0) += 1;
        }
    }

    // dense series from minute 0 to the last minute seen
    let last = minutes.keys().next_back().copied();
    let per_minute = match last {
        None => Vec::new(),
        Some(last) => (0..=last)
            .map(|minute| {
                minutes.remove(&minute).unwrap_or(MinuteBucket {
                    minute,
                    total: 0,
                    negative: 0,
                    prosocial: with_overlay.then_some(0),
                })
            })
            .collect(),
    };
    Ok(SessionStats {
        counts,
        by_source,
        per_minute,
    })
}

/// Stats restricted to one message source (e.g. participants only).
pub fn session_stats_for_source(
    records: &[LogRecord],
    overlay: Option<&LabelOverlay>,
    source: Source,
) -> Result<LabelCounts, AnalyticsError> {
    let stats = session_stats(records, overlay)?;
    Ok(stats
        .by_source
        .get(&source.to_string())
        .cloned()
        .unwrap_or(LabelCounts {
            prosocial: overlay.is_some().then_some(0),
            ..Default::default()
        }))
}

/// Stats for many sessions at once, in input order.
pub fn stats_many(sessions: &[LoadedSession], exec: Exec) -> Vec<SessionStats> {
    par::map(sessions, exec, |s| {
        session_stats(&s.records, None).expect("no overlay, no mismatch")
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInterval {
    pub state: PlotState,
    pub enter_ms: u64,
    pub exit_ms: u64,
}

/// Contiguous plot intervals covering `[0, end of session]`.
pub fn transition_timeline(session: &LoadedSession) -> Result<Vec<StateInterval>, AnalyticsError> {
    if session.manifest.mode != Mode::WithStory {
        return Err(AnalyticsError::NotWithStory);
    }
    let end = session.end_ms();
    let mut intervals = Vec::new();
    let mut current = StateInterval {
        state: PlotState::Stable,
        enter_ms: 0,
        exit_ms: end,
    };
    for r in &session.records {
        if let RecordBody::Transition(e) = &r.body {
            if e.kind == EventKind::StateChanged && e.state != current.state {
                current.exit_ms = e.at_ms;
                let next = StateInterval {
                    state: e.state,
                    enter_ms: e.at_ms,
                    exit_ms: end,
                };
                intervals.push(std::mem::replace(&mut current, next));
            }
        }
    }
    current.exit_ms = end;
    intervals.push(current);
    Ok(intervals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeReport {
    pub state: PlotState,
    pub horizon_ms: u64,
    pub entries: usize,
    pub before_mean: f64,
    pub after_mean: f64,
    /// `(after_mean - before_mean) / before_mean * 100`; 0 when both are 0.
    pub percent_change: f64,
}

/// Prosocial comments in the `horizon_ms` after each entry into `state`
/// against the same span before it. Before-window is `[t - h, t)`, after is
/// `[t, t + h)`; per-entry counts are averaged across entries before taking
/// the percentage change.
pub fn post_event_surge(
    records: &[LogRecord],
    overlay: Option<&LabelOverlay>,
    state: PlotState,
    horizon_ms: u64,
) -> Result<SurgeReport, AnalyticsError> {
    let overlay = overlay.ok_or(AnalyticsError::MissingOverlay)?;
    check_overlay(records, overlay)?;
    let entries: Vec<u64> = records
        .iter()
        .filter_map(|r| match &r.body {
            RecordBody::Transition(e) if e.kind == EventKind::StateChanged && e.state == state => {
                Some(e.at_ms)
            }
            _ => None,
        })
        .collect();
    if entries.is_empty() {
        return Err(AnalyticsError::NoSuchEvent(state));
    }
    let prosocial: Vec<u64> = comments(records)
        .filter(|(m, neg)| label_of(m, *neg, Some(overlay)) == CommentLabel::Prosocial)
        .map(|(m, _)| m.timestamp_ms)
        .collect();
    let count_in =
        |from: u64, to: u64| prosocial.iter().filter(|&&t| t >= from && t < to).count() as u64;

    let (before, after) = entries.iter().fold((0u64, 0u64), |(b, a), &t| {
        (
            b + count_in(t.saturating_sub(horizon_ms), t),
            a + count_in(t, t.saturating_add(horizon_ms)),
        )
    });
    let n = entries.len() as f64;
    let (before_mean, after_mean) = (before as f64 / n, after as f64 / n);
    let percent_change = match (before, after) {
        (0, 0) => 0.0,
        (0, _) => {
            return Err(AnalyticsError::ZeroBaseline {
                state,
                entries: entries.len(),
                after_total: after,
            })
        }
        _ => (after_mean - before_mean) / before_mean * 100.0,
    };
    Ok(SurgeReport {
        state,
        horizon_ms,
        entries: entries.len(),
        before_mean,
        after_mean,
        percent_change,
    })
}
