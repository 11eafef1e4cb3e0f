use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::sessions::RawSession;
use crate::error::{Error, Result};

/// Dense 1-based indices for raw item ids. Index 0 is padding and never
/// assigned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Indexes items in order of first appearance and counts their clicks.
    pub fn build(sessions: &[RawSession]) -> Self {
        let mut v = Self::new();
        for s in sessions {
            for item in &s.items {
                let idx = v.insert(item);
                v.counts[idx - 1] += 1;
            }
        }
        v
    }

    /// Returns the index of `id`, assigning the next one if unseen.
    pub fn insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.counts.push(0);
        let i = self.ids.len();
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(1)
            .and_then(|i| self.ids.get(i))
            .map(String::as_str)
    }

    pub fn count(&self, index: usize) -> u64 {
        index
            .checked_sub(1)
            .and_then(|i| self.counts.get(i))
            .copied()
            .unwrap_or(0)
    }

    /// Number of real items.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Raw ids in index order (index 1 first).
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut v = Self::new();
        for id in &ids {
            if v.get(id).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary id {id:?}")));
            }
            v.insert(id);
        }
        Ok(v)
    }

    /// `raw_id<TAB>index` per line, preceded by `#` comment lines.
    pub fn write_sidecar<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        for (i, id) in self.ids.iter().enumerate() {
            writeln!(w, "{id}\t{}", i + 1)?;
        }
        Ok(())
    }

    pub fn read_sidecar<R: BufRead>(r: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<vocabulary>", e))?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let (id, idx) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Data(format!("vocabulary line {}: missing tab", n + 1)))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("vocabulary line {}: bad index", n + 1)))?;
            pairs.push((idx, id.to_string()));
        }
        pairs.sort_by_key(|&(i, _)| i);
        for (expected, &(i, _)) in pairs.iter().enumerate() {
            if i != expected + 1 {
                return Err(Error::Data(format!(
                    "vocabulary indices must be 1..=n without gaps (found {i})"
                )));
            }
        }
        Self::from_ids(pairs.into_iter().map(|(_, id)| id).collect())
    }
}
