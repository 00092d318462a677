//! Reference rule evaluator written from the rule definitions alone, sharing
//! no code with the classifier. Used to cross-check it.

use std::collections::BTreeSet;

pub struct OracleConfig {
    pub profanity: Vec<String>,
    pub emotes: Vec<String>,
    pub caps_ratio_max: f64,
    pub caps_min_length: usize,
    pub emote_count_max: usize,
    pub symbol_ratio_max: f64,
    pub enabled: Vec<&'static str>,
}

impl OracleConfig {
    pub fn defaults() -> Self {
        let list = |text: &str| -> Vec<String> {
            text.lines()
                .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                .map(|l| l.trim().to_string())
                .collect()
        };
        Self {
            profanity: list(include_str!("../../fixtures/profanity.txt")),
            emotes: list(include_str!("../../fixtures/emotes.txt")),
            caps_ratio_max: 0.8,
            caps_min_length: 6,
            emote_count_max: 5,
            symbol_ratio_max: 0.5,
            enabled: vec!["Profanity", "Caps", "EmoteSpam", "SymbolSpam"],
        }
    }
}

/// Names of the rules that fire for `body`.
pub fn fired(body: &str, cfg: &OracleConfig) -> BTreeSet<&'static str> {
    let mut letters = 0usize;
    let mut upper = 0usize;
    let mut visible = 0usize;
    let mut symbols = 0usize;
    let mut total = 0usize;
    for c in body.chars() {
        total += 1;
        if c.is_whitespace() {
            continue;
        }
        visible += 1;
        if c.is_alphabetic() {
            letters += 1;
            if c.is_uppercase() {
                upper += 1;
            }
        } else if !c.is_numeric() {
            symbols += 1;
        }
    }

    let mut profane = false;
    let mut emotes = 0usize;
    for token in body.split_whitespace() {
        if cfg.emotes.iter().any(|e| e == token) {
            emotes += 1;
        }
        let chars: Vec<char> = token.chars().collect();
        let (mut lo, mut hi) = (0, chars.len());
        while lo < hi && !chars[lo].is_alphanumeric() {
            lo += 1;
        }
        while hi > lo && !chars[hi - 1].is_alphanumeric() {
            hi -= 1;
        }
        let core: String = chars[lo..hi].iter().collect::<String>().to_lowercase();
        if !core.is_empty() && cfg.profanity.iter().any(|p| p.to_lowercase() == core) {
            profane = true;
        }
    }

    let mut out = BTreeSet::new();
    let mut hit = |name: &'static str, cond: bool| {
        if cond && cfg.enabled.contains(&name) {
            out.insert(name);
        }
    };
    hit("Profanity", profane);
    hit(
        "Caps",
        letters >= cfg.caps_min_length
            && letters > 0
            && upper as f64 / letters as f64 > cfg.caps_ratio_max,
    );
    hit("EmoteSpam", emotes > cfg.emote_count_max);
    hit(
        "SymbolSpam",
        total >= 4 && visible > 0 && symbols as f64 / visible as f64 > cfg.symbol_ratio_max,
    );
    out
}

pub struct CorpusRow {
    pub body: String,
    pub fired: BTreeSet<String>,
}

pub fn corpus() -> Vec<CorpusRow> {
    include_str!("../../fixtures/classifier_corpus.jsonl")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("corpus line");
            CorpusRow {
                body: v["body"].as_str().unwrap().to_string(),
                fired: v["fired"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|r| r.as_str().unwrap().to_string())
                    .collect(),
            }
        })
        .collect()
}
