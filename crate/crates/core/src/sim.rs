//! Synthetic chat traffic and offline scenario runs.
//!
//! Arrivals are Poisson: neutral chat at `base_rate_per_s` for the whole
//! session, plus negative chat at each burst's rate inside the burst. All
//! randomness comes from one seeded ChaCha stream, so a profile and seed
//! always produce the same trace, and a scenario runs on logical time
//! without sleeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, Mode, Pipeline};
use crate::ingest::{ChatMessage, Source};
use crate::narrative::{EventKind, PlotState};
use crate::par::{self, Exec};
use crate::session_log::{LogRecord, RecordBody};

/// Distinct synthetic authors.
pub const AUTHOR_POOL: u32 = 500;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("vocabulary has no {0} bodies")]
    EmptyVocabulary(&'static str),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSpec {
    pub start_ms: u64,
    pub duration_ms: u64,
    pub negative_rate_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub neutral_bodies: Vec<String>,
    pub negative_bodies: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let neutral = [
            "nice play",
            "gg",
            "lol that was close",
            "hello chat",
            "what game is this",
            "love this stream",
            "that jump was clean",
            "lets go",
            "good luck on the boss",
            "this music is great",
            "first time here",
            "the bear is cute",
            "wp",
            "Kappa",
            "PogChamp nice",
        ];
        let negative = [
            "frak this streamer",
            "what a smeg play",
            "gorram trash gameplay",
            "drokk off",
            "you are grud at this",
            "shazbot noob",
        ];
        Self {
            neutral_bodies: neutral.iter().map(|s| s.to_string()).collect(),
            negative_bodies: negative.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn default_base_rate() -> f64 {
    1.67
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    #[serde(default = "default_base_rate")]
    pub base_rate_per_s: f64,
    #[serde(default)]
    pub burst_specs: Vec<BurstSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vocabulary: Vocabulary,
    /// Session length used by the CLI when no explicit duration is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        Self {
            base_rate_per_s: default_base_rate(),
            burst_specs: Vec::new(),
            seed: 0,
            vocabulary: Vocabulary::default(),
            duration_ms: None,
        }
    }
}

fn check_rate(what: &str, rate: f64) -> Result<(), SimError> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(SimError::InvalidProfile(format!(
            "{what} must be a finite rate >= 0, got {rate}"
        )))
    }
}

impl TrafficProfile {
    pub fn validate(&self, duration_ms: u64) -> Result<(), SimError> {
        if duration_ms == 0 {
            return Err(SimError::InvalidProfile("duration must be positive".into()));
        }
        check_rate("base_rate_per_s", self.base_rate_per_s)?;
        for b in &self.burst_specs {
            check_rate("negative_rate_per_s", b.negative_rate_per_s)?;
            if b.start_ms.saturating_add(b.duration_ms) > duration_ms {
                return Err(SimError::InvalidProfile(format!(
                    "burst at {} ms for {} ms runs past the {} ms session",
                    b.start_ms, b.duration_ms, duration_ms
                )));
            }
        }
        if self.base_rate_per_s > 0.0 && self.vocabulary.neutral_bodies.is_empty() {
            return Err(SimError::EmptyVocabulary("neutral"));
        }
        let bursts_active = self.burst_specs.iter().any(|b| b.negative_rate_per_s > 0.0);
        if bursts_active && self.vocabulary.negative_bodies.is_empty() {
            return Err(SimError::EmptyVocabulary("negative"));
        }
        Ok(())
    }
}

/// Poisson arrival times in `[from_ms, to_ms)`.
fn arrivals(rng: &mut ChaCha8Rng, rate_per_s: f64, from_ms: u64, to_ms: u64) -> Vec<u64> {
    if rate_per_s <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(rate_per_s).expect("positive rate");
    let mut out = Vec::new();
    let mut t = from_ms as f64 / 1000.0;
    loop {
        t += gap.sample(rng);
        let ms = (t * 1000.0).floor() as u64;
        if ms >= to_ms {
            return out;
        }
        out.push(ms);
    }
}

pub fn generate(profile: &TrafficProfile, duration_ms: u64) -> Result<Vec<ChatMessage>, SimError> {
    profile.validate(duration_ms)?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let vocab = &profile.vocabulary;

    let mut timed: Vec<(u64, bool)> = arrivals(&mut rng, profile.base_rate_per_s, 0, duration_ms)
        .into_iter()
        .map(|t| (t, false))
        .collect();
    for burst in &profile.burst_specs {
        let end = burst.start_ms + burst.duration_ms;
        timed.extend(
            arrivals(&mut rng, burst.negative_rate_per_s, burst.start_ms, end)
                .into_iter()
                .map(|t| (t, true)),
        );
    }
    timed.sort_unstable();

    let messages = timed
        .into_iter()
        .enumerate()
        .filter_map(|(i, (ts, negative))| {
            let pool = if negative {
                &vocab.negative_bodies
            } else {
                &vocab.neutral_bodies
            };
            let body = &pool[rng.random_range(0..pool.len())];
            let author = format!("viewer{}", rng.random_range(1..=AUTHOR_POOL));
            ChatMessage::new(
                format!("sim-{:07}", i + 1),
                "#sim",
                author,
                body,
                ts,
                Source::Synthetic,
            )
        })
        .collect();
    Ok(messages)
}

/// Runs the whole pipeline over generated traffic on logical time.
pub fn simulate_session(
    profile: &TrafficProfile,
    config: &EngineConfig,
    duration_ms: u64,
) -> Result<(Vec<ChatMessage>, Vec<LogRecord>), SimError> {
    config
        .validate()
        .map_err(|e| SimError::InvalidProfile(e.to_string()))?;
    let messages = generate(profile, duration_ms)?;
    let mut pipeline = Pipeline::from_config(config);
    let mut records = Vec::new();
    for m in &messages {
        records.extend(pipeline.ingest(m.clone()));
    }
    records.extend(pipeline.finish(duration_ms));
    Ok((messages, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub at_ms: u64,
    pub state: PlotState,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub window_end_ms: u64,
    pub negative_count: u64,
    pub message_count: u64,
    pub effective_threshold: f64,
    pub exceeded: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub messages: u64,
    pub negative: u64,
    pub not_negative: u64,
    pub windows: u64,
    pub windows_exceeded: u64,
    pub heart_bursts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub duration_ms: u64,
    pub mode: Mode,
    /// Plot states in the order they were entered, starting at `stable`.
    pub timeline: Vec<PlotState>,
    pub transitions: Vec<TransitionEntry>,
    pub verdicts: Vec<VerdictEntry>,
    pub counts: ScenarioCounts,
}

impl ScenarioReport {
    pub fn from_records(seed: u64, duration_ms: u64, mode: Mode, records: &[LogRecord]) -> Self {
        let mut report = ScenarioReport {
            seed,
            duration_ms,
            mode,
            timeline: vec![PlotState::Stable],
            transitions: Vec::new(),
            verdicts: Vec::new(),
            counts: ScenarioCounts::default(),
        };
        for r in records {
            match &r.body {
                RecordBody::Comment { classification, .. } => {
                    report.counts.messages += 1;
                    if classification.is_negative() {
                        report.counts.negative += 1;
                    } else {
                        report.counts.not_negative += 1;
                    }
                }
                RecordBody::Verdict(v) => {
                    report.counts.windows += 1;
                    report.counts.windows_exceeded += v.exceeded as u64;
                    report.verdicts.push(VerdictEntry {
                        window_end_ms: v.window_end_ms,
                        negative_count: v.negative_count,
                        message_count: v.message_count,
                        effective_threshold: v.effective_threshold,
                        exceeded: v.exceeded,
                    });
                }
                RecordBody::Transition(e) => {
                    match e.kind {
                        EventKind::StateChanged => report.timeline.push(e.state),
                        EventKind::HeartBurst => report.counts.heart_bursts += 1,
                        _ => {}
                    }
                    report.transitions.push(TransitionEntry {
                        at_ms: e.at_ms,
                        state: e.state,
                        event: e.kind,
                    });
                }
                RecordBody::Admin(_) | RecordBody::Notice { .. } => {}
            }
        }
        report
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_scenario(
    profile: &TrafficProfile,
    config: &EngineConfig,
    duration_ms: u64,
) -> Result<ScenarioReport, SimError> {
    let (_, records) = simulate_session(profile, config, duration_ms)?;
    Ok(ScenarioReport::from_records(
        profile.seed,
        duration_ms,
        config.mode,
        &records,
    ))
}

/// The same scenario under many seeds; reports come back in seed order.
pub fn run_seed_sweep(
    profile: &TrafficProfile,
    config: &EngineConfig,
    duration_ms: u64,
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<ScenarioReport>, SimError> {
    par::map(seeds, exec, |&seed| {
        let p = TrafficProfile {
            seed,
            ..profile.clone()
        };
        run_scenario(&p, config, duration_ms)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{classify_text, ClassifierConfig};

    #[test]
    fn same_seed_same_trace() {
        let p = TrafficProfile {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate(&p, 60_000).unwrap(), generate(&p, 60_000).unwrap());
        let q = TrafficProfile {
            seed: 43,
            ..Default::default()
        };
        assert_ne!(generate(&p, 60_000).unwrap(), generate(&q, 60_000).unwrap());
    }

    #[test]
    fn default_vocabulary_classifies_as_intended() {
        let cfg = ClassifierConfig::default();
        let v = Vocabulary::default();
        assert!(v
            .neutral_bodies
            .iter()
            .all(|b| !classify_text(b, &cfg).is_negative()));
        assert!(v
            .negative_bodies
            .iter()
            .all(|b| classify_text(b, &cfg).is_negative()));
    }

    #[test]
    fn negatives_only_inside_bursts() {
        let p = TrafficProfile {
            seed: 7,
            burst_specs: vec![BurstSpec {
                start_ms: 20_000,
                duration_ms: 10_000,
                negative_rate_per_s: 2.0,
            }],
            ..Default::default()
        };
        let negative: std::collections::BTreeSet<_> = p.vocabulary.negative_bodies.iter().collect();
        let msgs = generate(&p, 60_000).unwrap();
        let neg: Vec<_> = msgs.iter().filter(|m| negative.contains(&m.body)).collect();
        assert!(!neg.is_empty());
        assert!(neg
            .iter()
            .all(|m| (20_000..30_000).contains(&m.timestamp_ms)));
        assert!(msgs
            .windows(2)
            .all(|w| w[0].timestamp_ms <= w[1].timestamp_ms));
    }

    #[test]
    fn empty_vocabulary_rejected() {
        let mut p = TrafficProfile::default();
        p.vocabulary.neutral_bodies.clear();
        assert_eq!(
            generate(&p, 1_000),
            Err(SimError::EmptyVocabulary("neutral"))
        );
        let mut p = TrafficProfile::default();
        p.vocabulary.negative_bodies.clear();
        p.burst_specs.push(BurstSpec {
            start_ms: 0,
            duration_ms: 100,
            negative_rate_per_s: 1.0,
        });
        assert_eq!(
            generate(&p, 1_000),
            Err(SimError::EmptyVocabulary("negative"))
        );
    }

    #[test]
    fn bursts_must_fit() {
        let p = TrafficProfile {
            burst_specs: vec![BurstSpec {
                start_ms: 50_000,
                duration_ms: 20_000,
                negative_rate_per_s: 1.0,
            }],
            ..Default::default()
        };
        assert!(matches!(
            generate(&p, 60_000),
            Err(SimError::InvalidProfile(_))
        ));
        assert!(matches!(generate(&p, 0), Err(SimError::InvalidProfile(_))));
    }

    #[test]
    fn all_neutral_stays_stable() {
        let p = TrafficProfile {
            seed: 3,
            ..Default::default()
        };
        let r = run_scenario(&p, &EngineConfig::default(), 300_000).unwrap();
        assert_eq!(r.timeline, vec![PlotState::Stable]);
        assert_eq!(r.counts.windows, 30);
        assert_eq!(r.counts.negative, 0);
    }

    #[test]
    fn burst_leaves_stable() {
        let p = TrafficProfile {
            seed: 11,
            burst_specs: vec![BurstSpec {
                start_ms: 60_000,
                duration_ms: 20_000,
                negative_rate_per_s: 1.0,
            }],
            ..Default::default()
        };
        let r = run_scenario(&p, &EngineConfig::default(), 180_000).unwrap();
        assert!(r.timeline.len() > 1);
        assert_eq!(r.timeline[1], PlotState::Darkening);
        assert_eq!(*r.timeline.last().unwrap(), PlotState::Stable);
    }

    #[test]
    fn sweep_matches_individual_runs() {
        let p = TrafficProfile::default();
        let cfg = EngineConfig::default();
        let seeds = [1, 2, 3, 4];
        let par = run_seed_sweep(&p, &cfg, 60_000, &seeds, Exec::Parallel).unwrap();
        let seq = run_seed_sweep(&p, &cfg, 60_000, &seeds, Exec::Sequential).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par[2].seed, 3);
    }
}
