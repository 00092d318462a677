//! Sliding-window negativity detection.
//!
//! Messages are buffered for one window span; a verdict counts the negative
//! ones in `(now - window_ms, now]` and compares that count against a
//! threshold scaled by the audience size. Verdicts are clock-driven: the
//! engine evaluates every `window_ms` of session time whether or not any
//! message arrived.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classifier::ClassificationResult;
use crate::ingest::ChatMessage;

fn default_window_ms() -> u64 {
    10_000
}

fn default_threshold() -> f64 {
    1.12
}

fn default_floor() -> f64 {
    1.0
}

fn default_deescalate() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    #[serde(default = "default_window_ms")]
    pub window_ms: u64,
    /// Negative comments per ten thousand viewers per window.
    #[serde(default = "default_threshold")]
    pub threshold_per_10k: f64,
    #[serde(default = "default_floor")]
    pub min_effective_threshold: f64,
    #[serde(default = "default_deescalate")]
    pub deescalate_windows: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_ms: default_window_ms(),
            threshold_per_10k: default_threshold(),
            min_effective_threshold: default_floor(),
            deescalate_windows: default_deescalate(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DetectorConfigError {
    #[error("window_ms must be positive")]
    ZeroWindow,
    #[error("threshold_per_10k must be a finite value >= 0, got {0}")]
    BadThreshold(f64),
    #[error("min_effective_threshold must be > 0, got {0}")]
    BadFloor(f64),
    #[error("deescalate_windows must be >= 1")]
    ZeroDeescalate,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorConfigError> {
        if self.window_ms == 0 {
            return Err(DetectorConfigError::ZeroWindow);
        }
        if !(self.threshold_per_10k.is_finite() && self.threshold_per_10k >= 0.0) {
            return Err(DetectorConfigError::BadThreshold(self.threshold_per_10k));
        }
        if !(self.min_effective_threshold.is_finite() && self.min_effective_threshold > 0.0) {
            return Err(DetectorConfigError::BadFloor(self.min_effective_threshold));
        }
        if self.deescalate_windows == 0 {
            return Err(DetectorConfigError::ZeroDeescalate);
        }
        Ok(())
    }
}

/// `max(floor, threshold_per_10k * viewers / 10000)`.
pub fn effective_threshold(viewers: u64, config: &DetectorConfig) -> f64 {
    let scaled = config.threshold_per_10k * viewers as f64 / 10_000.0;
    scaled.max(config.min_effective_threshold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    pub window_end_ms: u64,
    pub negative_count: u64,
    /// All messages in the window, negative or not.
    pub message_count: u64,
    pub viewer_count: u64,
    pub effective_threshold: f64,
    pub exceeded: bool,
}

/// Reported when a message arrives earlier than one already recorded. The
/// message is kept, stamped with the last seen time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimestampRegression {
    pub given_ms: u64,
    pub clamped_to_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    at_ms: u64,
    negative: bool,
}

#[derive(Debug, Clone)]
pub struct NegativityDetector {
    window_ms: u64,
    entries: VecDeque<Entry>,
    last_ms: Option<u64>,
}

impl NegativityDetector {
    pub fn new(window_ms: u64) -> Self {
        assert!(window_ms > 0, "window_ms must be positive");
        Self {
            window_ms,
            entries: VecDeque::new(),
            last_ms: None,
        }
    }

    pub fn window_ms(&self) -> u64 {
        self.window_ms
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_ms(&self) -> Option<u64> {
        self.last_ms
    }

    pub fn record(
        &mut self,
        message: &ChatMessage,
        result: &ClassificationResult,
    ) -> Option<TimestampRegression> {
        self.record_at(message.timestamp_ms, result.is_negative())
    }

    pub fn record_at(&mut self, at_ms: u64, negative: bool) -> Option<TimestampRegression> {
        let mut regression = None;
        let at_ms = match self.last_ms {
            Some(last) if at_ms < last => {
                log::warn!("timestamp regression: {at_ms} ms after {last} ms, clamping");
                regression = Some(TimestampRegression {
                    given_ms: at_ms,
                    clamped_to_ms: last,
                });
                last
            }
            _ => at_ms,
        };
        self.last_ms = Some(at_ms);
        self.entries.push_back(Entry { at_ms, negative });
        if let Some(horizon) = at_ms.checked_sub(self.window_ms) {
            while self.entries.front().is_some_and(|e| e.at_ms <= horizon) {
                self.entries.pop_front();
            }
        }
        regression
    }

    pub fn evaluate(&self, now_ms: u64, viewers: u64, config: &DetectorConfig) -> WindowVerdict {
        let start = now_ms.checked_sub(self.window_ms);
        let in_window = |e: &&Entry| e.at_ms <= now_ms && start.is_none_or(|s| e.at_ms > s);
        let (negative_count, message_count) = self
            .entries
            .iter()
            .filter(in_window)
            .fold((0u64, 0u64), |(n, m), e| (n + e.negative as u64, m + 1));
        let threshold = effective_threshold(viewers, config);
        WindowVerdict {
            window_end_ms: now_ms,
            negative_count,
            message_count,
            viewer_count: viewers,
            effective_threshold: threshold,
            exceeded: negative_count as f64 > threshold,
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> DetectorConfig {
        DetectorConfig::default()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(effective_threshold(10_000, &cfg()), 1.12);
        assert_eq!(effective_threshold(0, &cfg()), 1.0);
        assert!((effective_threshold(50_000, &cfg()) - 5.6).abs() < 1e-12);
    }

    #[test]
    fn holds_messages_within_span() {
        let mut d = NegativityDetector::new(10_000);
        for t in [0, 4_000, 9_000] {
            d.record_at(t, false);
        }
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn evicts_past_span() {
        let mut d = NegativityDetector::new(10_000);
        d.record_at(0, true);
        d.record_at(10_001, false);
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn regression_is_clamped() {
        let mut d = NegativityDetector::new(10_000);
        d.record_at(5_000, false);
        let r = d.record_at(4_000, true);
        assert_eq!(
            r,
            Some(TimestampRegression {
                given_ms: 4_000,
                clamped_to_ms: 5_000
            })
        );
        assert_eq!(d.last_ms(), Some(5_000));
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn verdict_strict_comparison() {
        let mut d = NegativityDetector::new(10_000);
        d.record_at(1_000, true);
        d.record_at(2_000, true);
        let v = d.evaluate(10_000, 10_000, &cfg());
        assert_eq!(v.negative_count, 2);
        assert!(v.exceeded);

        let mut d = NegativityDetector::new(10_000);
        d.record_at(1_000, true);
        let v = d.evaluate(10_000, 10_000, &cfg());
        assert!(!v.exceeded);

        let d = NegativityDetector::new(10_000);
        assert!(!d.evaluate(10_000, 0, &cfg()).exceeded);
    }

    #[test]
    fn window_is_left_open_right_closed() {
        let mut d = NegativityDetector::new(10_000);
        d.record_at(10_000, true);
        d.record_at(20_000, true);
        let v = d.evaluate(20_000, 0, &cfg());
        assert_eq!(v.negative_count, 1);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = DetectorConfig {
            window_ms: 0,
            ..cfg()
        };
        assert_eq!(bad.validate(), Err(DetectorConfigError::ZeroWindow));
        let bad = DetectorConfig {
            threshold_per_10k: -1.0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
        let bad = DetectorConfig {
            min_effective_threshold: 0.0,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn more_viewers_never_trigger_more(negatives in 0u64..20, v1 in 0u64..200_000, extra in 0u64..200_000) {
            let c = cfg();
            let low = negatives as f64 > effective_threshold(v1, &c);
            let high = negatives as f64 > effective_threshold(v1 + extra, &c);
            prop_assert!(!high || low);
        }
    }
}
