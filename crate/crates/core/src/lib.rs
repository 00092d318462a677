//! # storychat-core
//!
//! Live-stream chat in, narrative cues out. Chat from any source is
//! normalized into [`ingest::ChatMessage`]s, classified by a rule-based
//! negativity filter, counted in sliding windows against an
//! audience-scaled threshold, and the per-window verdicts drive a small
//! storyline state machine whose events a viewer overlay animates.
//!
//! Everything that affects engine output runs in [`engine::Pipeline`] on
//! session-relative logical time, so a session log replays to identical
//! verdicts and transitions at any speed.
//!
//! ## Modules
//!
//! | module | role |
//! |---|---|
//! | [`ingest`] | IRC parsing, room protocol, time-ordered merge |
//! | [`classifier`] | profanity / caps / emote / symbol rules |
//! | [`detector`] | windowed negativity verdicts |
//! | [`narrative`] | storyline state machine |
//! | [`session_log`] | JSON Lines persistence and replay |
//! | [`engine`] | the ordered pipeline, admin changes, client updates |
//! | [`sim`] | seeded synthetic traffic and offline scenarios |
//! | [`analytics`] | counts, timelines and post-event surge |
//! | [`par`] | rayon / sequential switch for batch work |

pub mod analytics;
pub mod classifier;
pub mod detector;
pub mod engine;
pub mod ingest;
pub mod narrative;
pub mod par;
pub mod session_log;
pub mod sim;

pub use classifier::{classify, ClassificationResult, ClassifierConfig, Label, Rule};
pub use detector::{effective_threshold, DetectorConfig, NegativityDetector, WindowVerdict};
pub use engine::{ClientUpdate, EngineConfig, Mode, Pipeline, UpdatePayload};
pub use ingest::{ChatMessage, Source};
pub use narrative::{FsmConfig, NarrativeEvent, NarrativeMachine, PlotState};
pub use session_log::{LogRecord, SessionManifest};
