use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::instances::Session;

/// Right-padded batch of instances. `indices` is `rows x max_len`
/// row-major with 0 at every padded position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub max_len: usize,
    pub lengths: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_sessions<'a>(sessions: impl IntoIterator<Item = &'a Session>) -> Self {
        let sessions: Vec<&Session> = sessions.into_iter().collect();
        let max_len = sessions.iter().map(|s| s.items.len()).max().unwrap_or(0);
        let mut indices = vec![0; sessions.len() * max_len];
        for (r, s) in sessions.iter().enumerate() {
            indices[r * max_len..r * max_len + s.items.len()].copy_from_slice(&s.items);
        }
        Self {
            indices,
            max_len,
            lengths: sessions.iter().map(|s| s.items.len()).collect(),
            labels: sessions.iter().map(|s| s.label).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.lengths.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[r * self.max_len..(r + 1) * self.max_len]
    }

    /// Pads every row to `max_len` (must not shrink).
    pub fn padded_to(&self, max_len: usize) -> Self {
        assert!(max_len >= self.max_len);
        let mut indices = vec![0; self.rows() * max_len];
        for r in 0..self.rows() {
            indices[r * max_len..r * max_len + self.max_len].copy_from_slice(self.row(r));
        }
        Self {
            indices,
            max_len,
            lengths: self.lengths.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Order in which an epoch visits the instances: a ChaCha shuffle seeded
/// from `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mixed = seed ^ (epoch as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    order.shuffle(&mut rng);
    order
}

/// Shuffled batches for one training epoch; the last batch may be short.
pub fn batch_iter<'a>(
    instances: &'a [Session],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> impl Iterator<Item = Batch> + 'a {
    assert!(batch_size >= 1, "batch size must be positive");
    let order = epoch_order(instances.len(), seed, epoch);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks
        .into_iter()
        .map(move |idx| Batch::from_sessions(idx.iter().map(|&i| &instances[i])))
}

/// Unshuffled batches in input order.
pub fn sequential_batches(instances: &[Session], batch_size: usize) -> impl Iterator<Item = Batch> + '_ {
    assert!(batch_size >= 1, "batch size must be positive");
    instances.chunks(batch_size).map(Batch::from_sessions)
}
