use std::io::{BufRead, Write};

use super::sessions::RawSession;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

/// A full click sequence in vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickSequence {
    pub items: Vec<usize>,
    pub origin_time: i64,
}

/// One prediction instance: the clicks so far and the next click.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Session {
    pub items: Vec<usize>,
    pub label: usize,
    pub origin_time: i64,
}

impl Session {
    pub fn new(items: Vec<usize>, label: usize) -> Self {
        Self {
            items,
            label,
            origin_time: 0,
        }
    }
}

/// Maps raw sessions to indices. Items missing from the vocabulary are
/// dropped, as are sequences that end up shorter than `min_len`.
pub fn encode_sessions(sessions: &[RawSession], vocab: &Vocabulary, min_len: usize) -> Vec<ClickSequence> {
    sessions
        .iter()
        .filter_map(|s| {
            let items: Vec<usize> = s.items.iter().filter_map(|i| vocab.get(i)).collect();
            (items.len() >= min_len).then_some(ClickSequence {
                items,
                origin_time: s.origin_time,
            })
        })
        .collect()
}

/// Expands `[a, b, c, d]` into `[a]→b`, `[a, b]→c`, `[a, b, c]→d`.
pub fn augment_prefixes(sequences: &[ClickSequence]) -> Vec<Session> {
    let mut out = Vec::with_capacity(sequences.iter().map(|s| s.items.len().saturating_sub(1)).sum());
    for seq in sequences {
        for end in 1..seq.items.len() {
            out.push(Session {
                items: seq.items[..end].to_vec(),
                label: seq.items[end],
                origin_time: seq.origin_time,
            });
        }
    }
    out
}

/// One instance per line: space-separated item indices, a tab, the label.
/// Leading `#` lines are comments.
pub fn write_instances<W: Write>(mut w: W, instances: &[Session], comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for inst in instances {
        let mut first = true;
        for i in &inst.items {
            if !first {
                w.write_all(b" ")?;
            }
            write!(w, "{i}")?;
            first = false;
        }
        writeln!(w, "\t{}", inst.label)?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(r: R) -> Result<Vec<Session>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<instances>", e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Data(format!("instance line {}: {line:?}", n + 1));
        let (items, label) = line.split_once('\t').ok_or_else(bad)?;
        let items = items
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        let label: usize = label.trim().parse().map_err(|_| bad())?;
        if items.is_empty() || label == 0 || items.contains(&0) {
            return Err(bad());
        }
        out.push(Session::new(items, label));
    }
    Ok(out)
}
