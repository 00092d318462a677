//! Rule-based negativity filter.
//!
//! A message is negative when at least one enabled rule fires: profanity,
//! excessive capitals, emote spam or symbol spam. There is no scoring and no
//! learned model; every verdict lists exactly the rules that fired.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::ChatMessage;
use crate::par::{self, Exec};

const DEFAULT_PROFANITY: &str = include_str!("../fixtures/profanity.txt");
const DEFAULT_EMOTES: &str = include_str!("../fixtures/emotes.txt");

/// Minimum body length (in chars) before the symbol-spam rule applies.
pub const SYMBOL_MIN_LENGTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    Profanity,
    Caps,
    EmoteSpam,
    SymbolSpam,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::Profanity,
        Rule::Caps,
        Rule::EmoteSpam,
        Rule::SymbolSpam,
    ];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Rule {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| ConfigError::UnknownRule(s.to_owned()))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: String },
    #[error("emote lexicon entry {0:?} is empty or contains whitespace")]
    BadEmote(String),
    #[error("reading config: {0}")]
    Io(String),
    #[error("parsing config: {0}")]
    Parse(String),
}

fn parse_term_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

fn default_profanity() -> BTreeSet<String> {
    parse_term_list(DEFAULT_PROFANITY)
}

fn default_emotes() -> BTreeSet<String> {
    parse_term_list(DEFAULT_EMOTES)
}

fn default_caps_ratio_max() -> f64 {
    0.8
}

fn default_caps_min_length() -> usize {
    6
}

fn default_emote_count_max() -> usize {
    5
}

fn default_symbol_ratio_max() -> f64 {
    0.5
}

fn default_rules() -> BTreeSet<Rule> {
    Rule::ALL.into_iter().collect()
}

/// Thresholds here are calibration knobs, overridable from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    #[serde(default = "default_profanity")]
    pub profanity_terms: BTreeSet<String>,
    #[serde(default = "default_caps_ratio_max")]
    pub caps_ratio_max: f64,
    #[serde(default = "default_caps_min_length")]
    pub caps_min_length: usize,
    #[serde(default = "default_emote_count_max")]
    pub emote_count_max: usize,
    #[serde(default = "default_emotes")]
    pub emote_lexicon: BTreeSet<String>,
    #[serde(default = "default_symbol_ratio_max")]
    pub symbol_ratio_max: f64,
    #[serde(default = "default_rules")]
    pub enabled_rules: BTreeSet<Rule>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            profanity_terms: default_profanity(),
            caps_ratio_max: default_caps_ratio_max(),
            caps_min_length: default_caps_min_length(),
            emote_count_max: default_emote_count_max(),
            emote_lexicon: default_emotes(),
            symbol_ratio_max: default_symbol_ratio_max(),
            enabled_rules: default_rules(),
        }
    }
}

fn check_fraction(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            value: value.to_string(),
        })
    }
}

impl ClassifierConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::from_json(&text)
    }

    /// Lowercases the profanity terms; matching is case-insensitive.
    pub fn normalize(&mut self) {
        self.profanity_terms = self
            .profanity_terms
            .iter()
            .map(|t| t.to_lowercase())
            .collect();
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_fraction("caps_ratio_max", self.caps_ratio_max)?;
        check_fraction("symbol_ratio_max", self.symbol_ratio_max)?;
        if self.caps_min_length < 1 {
            return Err(ConfigError::OutOfRange {
                field: "caps_min_length",
                value: self.caps_min_length.to_string(),
            });
        }
        if let Some(bad) = self
            .emote_lexicon
            .iter()
            .find(|e| e.is_empty() || e.chars().any(char::is_whitespace))
        {
            return Err(ConfigError::BadEmote(bad.clone()));
        }
        Ok(())
    }

    /// Returns a copy with `update` applied, or an error leaving `self` untouched.
    pub fn with_update(&self, update: &FilterUpdate) -> Result<Self, ConfigError> {
        let mut next = self.clone();
        if let Some(names) = &update.enabled_rules {
            next.enabled_rules = names
                .iter()
                .map(|n| n.parse())
                .collect::<Result<BTreeSet<Rule>, _>>()?;
        }
        if let Some(v) = update.caps_ratio_max {
            next.caps_ratio_max = v;
        }
        if let Some(v) = update.caps_min_length {
            next.caps_min_length = v;
        }
        if let Some(v) = update.emote_count_max {
            next.emote_count_max = v;
        }
        if let Some(v) = update.symbol_ratio_max {
            next.symbol_ratio_max = v;
        }
        if let Some(terms) = &update.profanity_terms {
            next.profanity_terms = terms.iter().cloned().collect();
            next.normalize();
        }
        next.validate()?;
        Ok(next)
    }
}

/// Partial classifier change sent by the admin panel. Rule names stay as
/// text so that an unknown name is reported rather than silently dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled_rules: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps_ratio_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps_min_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emote_count_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol_ratio_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profanity_terms: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    NotNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub caps_ratio: f64,
    pub symbol_ratio: f64,
    pub emote_count: usize,
    pub profanity_hits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub label: Label,
    pub fired: BTreeSet<Rule>,
    pub metrics: Metrics,
}

impl ClassificationResult {
    pub fn is_negative(&self) -> bool {
        self.label == Label::Negative
    }
}

/// Uppercase letters over all letters; 0 when there are no letters.
pub fn caps_ratio(body: &str) -> f64 {
    let (upper, letters) = body
        .chars()
        .filter(|c| c.is_alphabetic())
        .fold((0usize, 0usize), |(u, n), c| {
            (u + c.is_uppercase() as usize, n + 1)
        });
    if letters == 0 {
        0.0
    } else {
        upper as f64 / letters as f64
    }
}

/// Non-alphanumeric characters over all non-whitespace characters.
pub fn symbol_ratio(body: &str) -> f64 {
    let (symbols, visible) = body
        .chars()
        .filter(|c| !c.is_whitespace())
        .fold((0usize, 0usize), |(s, n), c| {
            (s + !c.is_alphanumeric() as usize, n + 1)
        });
    if visible == 0 {
        0.0
    } else {
        symbols as f64 / visible as f64
    }
}

pub fn count_emotes(body: &str, lexicon: &BTreeSet<String>) -> usize {
    body.split_whitespace()
        .filter(|t| lexicon.contains(*t))
        .count()
}

fn profanity_hits(body: &str, terms: &BTreeSet<String>) -> Vec<String> {
    body.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty() && terms.contains(t))
        .collect()
}

pub fn classify_text(body: &str, config: &ClassifierConfig) -> ClassificationResult {
    let metrics = Metrics {
        caps_ratio: caps_ratio(body),
        symbol_ratio: symbol_ratio(body),
        emote_count: count_emotes(body, &config.emote_lexicon),
        profanity_hits: profanity_hits(body, &config.profanity_terms),
    };
    let letters = body.chars().filter(|c| c.is_alphabetic()).count();
    let candidates = [
        (Rule::Profanity, !metrics.profanity_hits.is_empty()),
        (
            Rule::Caps,
            letters >= config.caps_min_length && metrics.caps_ratio > config.caps_ratio_max,
        ),
        (
            Rule::EmoteSpam,
            metrics.emote_count > config.emote_count_max,
        ),
        (
            Rule::SymbolSpam,
            body.chars().count() >= SYMBOL_MIN_LENGTH
                && metrics.symbol_ratio > config.symbol_ratio_max,
        ),
    ];
    let fired: BTreeSet<Rule> = candidates
        .into_iter()
        .filter(|(rule, hit)| *hit && config.enabled_rules.contains(rule))
        .map(|(rule, _)| rule)
        .collect();
    let label = if fired.is_empty() {
        Label::NotNegative
    } else {
        Label::Negative
    };
    ClassificationResult {
        label,
        fired,
        metrics,
    }
}

pub fn classify(message: &ChatMessage, config: &ClassifierConfig) -> ClassificationResult {
    classify_text(&message.body, config)
}

/// Classifies a batch of messages under one config snapshot.
pub fn classify_batch(
    messages: &[ChatMessage],
    config: &ClassifierConfig,
    exec: Exec,
) -> Vec<ClassificationResult> {
    par::map(messages, exec, |m| classify(m, config))
}
