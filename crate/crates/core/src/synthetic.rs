//! Generated datasets with known structure, used for end-to-end checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{augment_prefixes, ClickSequence, Session};

/// Sessions of consecutive items `(start + k) mod vocab`, 1-based, with
/// lengths drawn uniformly from `min_len..=max_len`.
pub fn successor_sequences(
    n_sessions: usize,
    vocab: usize,
    min_len: usize,
    max_len: usize,
    seed: u64,
) -> Vec<ClickSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sessions)
        .map(|i| {
            let start = rng.random_range(0..vocab);
            let len = rng.random_range(min_len..=max_len);
            ClickSequence {
                items: (0..len).map(|k| (start + k) % vocab + 1).collect(),
                origin_time: i as i64,
            }
        })
        .collect()
}

/// Prefix-augmented successor instances: the label is always
/// `last mod vocab + 1`.
pub fn successor_task(n_sessions: usize, vocab: usize, seed: u64) -> Vec<Session> {
    augment_prefixes(&successor_sequences(n_sessions, vocab, 2, 8, seed))
}

/// Layout of the long-range task's vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LongRangeSpec {
    pub anchors: usize,
    pub fillers: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
}

impl Default for LongRangeSpec {
    fn default() -> Self {
        Self {
            anchors: 50,
            fillers: 50,
            min_fillers: 2,
            max_fillers: 6,
        }
    }
}

impl LongRangeSpec {
    /// Anchors, then fillers, then one label item per anchor.
    pub fn vocab_size(&self) -> usize {
        2 * self.anchors + self.fillers
    }

    pub fn label_of(&self, anchor: usize) -> usize {
        self.anchors + self.fillers + anchor
    }
}

/// One instance per session: an anchor item, then random filler items; the
/// label is determined by the anchor alone, so the last item carries no
/// information about it.
pub fn long_range_task(n_sessions: usize, spec: &LongRangeSpec, seed: u64) -> Vec<Session> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_sessions)
        .map(|i| {
            let anchor = rng.random_range(1..=spec.anchors);
            let n_fill = rng.random_range(spec.min_fillers..=spec.max_fillers);
            let mut items = vec![anchor];
            items.extend((0..n_fill).map(|_| spec.anchors + rng.random_range(1..=spec.fillers)));
            Session {
                items,
                label: spec.label_of(anchor),
                origin_time: i as i64,
            }
        })
        .collect()
}
