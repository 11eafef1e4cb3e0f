use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::events::{parse_events, EventFormat};
use super::instances::{augment_prefixes, encode_sessions, Session};
use super::sessions::{build_sessions, filter_dataset, restrict_to_items, split_train_test, take_recent_fraction, DAY_MS};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub format: EventFormat,
    pub min_item_count: usize,
    pub min_session_len: usize,
    /// Sessions ending in the final `holdout_days` form the test split.
    pub holdout_days: f64,
    /// Share of the most recent train sessions kept.
    pub fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self::yoochoose()
    }
}

impl PreprocessConfig {
    pub fn yoochoose() -> Self {
        Self {
            format: EventFormat::yoochoose(),
            min_item_count: 5,
            min_session_len: 2,
            holdout_days: 1.0,
            fraction: 1.0 / 64.0,
        }
    }

    pub fn diginetica() -> Self {
        Self {
            format: EventFormat::diginetica(),
            min_item_count: 5,
            min_session_len: 2,
            holdout_days: 7.0,
            fraction: 1.0,
        }
    }

    pub fn holdout_ms(&self) -> i64 {
        (self.holdout_days * DAY_MS as f64).round() as i64
    }
}

/// Dataset summary in the usual click/session/item layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Clicks across the retained train and test sequences.
    pub clicks: usize,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub items: usize,
    /// Mean length of the augmented sub-sessions (prefix plus label).
    pub avg_length: f64,
    pub malformed_lines: usize,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "All the clicks\tTrain sessions\tTest sessions\tAll the items\tAvg. length")?;
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:.2}",
            self.clicks, self.train_sessions, self.test_sessions, self.items, self.avg_length
        )
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub train: Vec<Session>,
    pub test: Vec<Session>,
    pub vocab: Vocabulary,
    pub stats: DatasetStats,
}

/// parse → sessions → filter → split → recency cut → vocabulary → augment.
pub fn preprocess<R: BufRead>(reader: R, cfg: &PreprocessConfig) -> Result<Preprocessed> {
    let parsed = parse_events(reader, &cfg.format)?;
    let sessions = build_sessions(&parsed.events);
    let mut warnings = Vec::new();
    let filtered = filter_dataset(sessions, cfg.min_item_count, cfg.min_session_len);
    if filtered.is_empty() {
        warnings.push("filtering removed every session".to_string());
        return Err(Error::Data("no sessions left after filtering".into()));
    }
    let (train, test) = split_train_test(filtered, cfg.holdout_ms(), cfg.min_session_len)?;
    let train = take_recent_fraction(train, cfg.fraction)?;
    let vocab = Vocabulary::build(&train);
    let known: HashSet<&str> = vocab.ids().iter().map(String::as_str).collect();
    let test = restrict_to_items(test, &known, cfg.min_session_len);
    if test.is_empty() {
        return Err(Error::Data("test split is empty after the recency cut".into()));
    }
    let train_seq = encode_sessions(&train, &vocab, cfg.min_session_len);
    let test_seq = encode_sessions(&test, &vocab, cfg.min_session_len);
    let train_inst = augment_prefixes(&train_seq);
    let test_inst = augment_prefixes(&test_seq);
    if train_inst.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }

    let clicks = train_seq.iter().chain(&test_seq).map(|s| s.items.len()).sum();
    let n_inst = train_inst.len() + test_inst.len();
    let total_len: usize = train_inst.iter().chain(&test_inst).map(|s| s.items.len() + 1).sum();
    let stats = DatasetStats {
        clicks,
        train_sessions: train_inst.len(),
        test_sessions: test_inst.len(),
        items: vocab.len(),
        avg_length: total_len as f64 / n_inst as f64,
        malformed_lines: parsed.malformed,
        warnings,
    };
    Ok(Preprocessed {
        train: train_inst,
        test: test_inst,
        vocab,
        stats,
    })
}
