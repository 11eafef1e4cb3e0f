//! Ranking metrics: rank of the true next item, HR@K and MRR@K, plus a
//! popularity baseline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{sequential_batches, Session};
use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, ModelParams};
use crate::nncore::Real;

/// 1-based rank of `label` (an item index, so score column `label - 1`).
///
/// Ties are broken by ascending item index: an equal score at a smaller
/// index ranks ahead of the label.
pub fn rank_of_target<T: Real>(scores: &[T], label: usize) -> Result<usize> {
    if label == 0 || label > scores.len() {
        return Err(Error::IndexOutOfRange {
            index: label,
            vocab_size: scores.len(),
        });
    }
    let col = label - 1;
    let target = scores[col];
    let mut rank = 1;
    for (i, &s) in scores.iter().enumerate() {
        if s > target || (s == target && i < col) {
            rank += 1;
        }
    }
    Ok(rank)
}

fn non_empty(ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::Data("cannot compute metrics over zero instances".into()));
    }
    Ok(())
}

/// Fraction of ranks within the top `k`.
pub fn hr_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    non_empty(ranks)?;
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Mean of `1/rank`, counting ranks beyond `k` as zero.
///
/// Summed per rank value, so the result does not depend on instance order.
pub fn mrr_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    non_empty(ranks)?;
    let mut counts = vec![0usize; k + 1];
    for &r in ranks.iter().filter(|&&r| r <= k) {
        counts[r] += 1;
    }
    let total: f64 = counts
        .iter()
        .enumerate()
        .skip(1)
        .map(|(r, &c)| c as f64 / r as f64)
        .sum();
    Ok(total / ranks.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub n_test: usize,
    pub n_hit: usize,
    pub hr: f64,
    pub mrr: f64,
}

impl MetricsReport {
    pub fn from_ranks(ranks: &[usize], k: usize) -> Result<Self> {
        Ok(Self {
            k,
            n_test: ranks.len(),
            n_hit: ranks.iter().filter(|&&r| r <= k).count(),
            hr: hr_at_k(ranks, k)?,
            mrr: mrr_at_k(ranks, k)?,
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "HR@{k} = {:.4} ({}/{})  MRR@{k} = {:.4}",
            self.hr,
            self.n_hit,
            self.n_test,
            self.mrr,
            k = self.k
        )
    }
}

/// Batch size used when scoring test instances.
pub const EVAL_BATCH: usize = 100;

/// Rank of each instance's label under the model.
pub fn rank_instances<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    instances: &[Session],
) -> Result<Vec<usize>> {
    if let Some(bad) = instances.iter().find(|s| s.label == 0 || s.label > cfg.vocab_size) {
        return Err(Error::Data(format!(
            "label {} outside the model vocabulary of {} items",
            bad.label, cfg.vocab_size
        )));
    }
    let mut ranks = Vec::with_capacity(instances.len());
    for batch in sequential_batches(instances, EVAL_BATCH) {
        let (scores, _) = forward(cfg, params, &batch).map_err(|e| match e {
            Error::IndexOutOfRange { index, vocab_size } => Error::Data(format!(
                "item {index} outside the model vocabulary of {vocab_size} items"
            )),
            other => other,
        })?;
        for (r, &label) in batch.labels.iter().enumerate() {
            ranks.push(rank_of_target(scores.row(r), label)?);
        }
    }
    Ok(ranks)
}

/// HR@k and MRR@k of the model over `instances`.
pub fn evaluate<T: Real>(
    cfg: &ModelConfig,
    params: &ModelParams<T>,
    instances: &[Session],
    k: usize,
) -> Result<MetricsReport> {
    MetricsReport::from_ranks(&rank_instances(cfg, params, instances)?, k)
}

/// Training click frequency per item (index `i` at position `i - 1`).
/// Each instance label is one click; with prefix augmentation this counts
/// every click except the first of each session.
pub fn popularity_scores(train: &[Session], vocab_size: usize) -> Vec<f64> {
    let mut counts = vec![0.0; vocab_size];
    for s in train {
        if (1..=vocab_size).contains(&s.label) {
            counts[s.label - 1] += 1.0;
        }
    }
    counts
}

/// Ranks every test instance against the same popularity vector.
pub fn popularity_baseline(
    train: &[Session],
    test: &[Session],
    vocab_size: usize,
    k: usize,
) -> Result<MetricsReport> {
    let scores = popularity_scores(train, vocab_size);
    let ranks = test
        .iter()
        .map(|s| rank_of_target(&scores, s.label))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_ranks(&ranks, k)
}
