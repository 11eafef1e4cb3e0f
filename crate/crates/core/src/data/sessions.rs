use std::collections::{HashMap, HashSet};

use super::events::RawEvent;
use crate::error::{Error, Result};

pub const DAY_MS: i64 = 86_400_000;

/// Time-ordered clicks of one session, still keyed by raw item ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSession {
    pub session_id: String,
    pub items: Vec<String>,
    /// Timestamp of the last click.
    pub origin_time: i64,
}

impl RawSession {
    pub fn new(session_id: impl Into<String>, items: &[&str], origin_time: i64) -> Self {
        Self {
            session_id: session_id.into(),
            items: items.iter().map(|s| s.to_string()).collect(),
            origin_time,
        }
    }
}

/// Groups events by session id and orders each group by timestamp. Ties
/// keep input order. Sessions come out in order of first appearance.
pub fn build_sessions(events: &[RawEvent]) -> Vec<RawSession> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&RawEvent>> = HashMap::new();
    for ev in events {
        groups
            .entry(ev.session_id.as_str())
            .or_insert_with(|| {
                order.push(ev.session_id.as_str());
                Vec::new()
            })
            .push(ev);
    }
    order
        .into_iter()
        .map(|id| {
            let mut evs = groups.remove(id).expect("grouped");
            evs.sort_by_key(|e| e.timestamp);
            RawSession {
                session_id: id.to_string(),
                origin_time: evs.last().map_or(0, |e| e.timestamp),
                items: evs.into_iter().map(|e| e.item_id.clone()).collect(),
            }
        })
        .collect()
}

/// Single sweep: count every click, drop clicks on items seen fewer than
/// `min_item_count` times, then drop sessions left shorter than
/// `min_session_len`.
pub fn filter_dataset(
    sessions: Vec<RawSession>,
    min_item_count: usize,
    min_session_len: usize,
) -> Vec<RawSession> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &sessions {
        for item in &s.items {
            *counts.entry(item.as_str()).or_default() += 1;
        }
    }
    let rare: HashSet<String> = counts
        .into_iter()
        .filter(|&(_, c)| c < min_item_count)
        .map(|(i, _)| i.to_string())
        .collect();
    sessions
        .into_iter()
        .filter_map(|mut s| {
            s.items.retain(|i| !rare.contains(i));
            (s.items.len() >= min_session_len).then_some(s)
        })
        .collect()
}

/// Removes clicks on items outside `known`, then drops sessions shorter
/// than `min_session_len`.
pub fn restrict_to_items(
    sessions: Vec<RawSession>,
    known: &HashSet<&str>,
    min_session_len: usize,
) -> Vec<RawSession> {
    sessions
        .into_iter()
        .filter_map(|mut s| {
            s.items.retain(|i| known.contains(i.as_str()));
            (s.items.len() >= min_session_len).then_some(s)
        })
        .collect()
}

/// Sessions ending within the final `holdout_ms` of the data span form
/// the test split. Test clicks on items never seen in train are removed.
pub fn split_train_test(
    sessions: Vec<RawSession>,
    holdout_ms: i64,
    min_session_len: usize,
) -> Result<(Vec<RawSession>, Vec<RawSession>)> {
    let end = sessions
        .iter()
        .map(|s| s.origin_time)
        .max()
        .ok_or_else(|| Error::Data("no sessions to split".into()))?;
    let cutoff = end - holdout_ms;
    let (test, train): (Vec<_>, Vec<_>) = sessions.into_iter().partition(|s| s.origin_time > cutoff);
    if train.is_empty() {
        return Err(Error::Data(format!(
            "train split is empty: every session ends within the final {holdout_ms} ms"
        )));
    }
    let known: HashSet<&str> = train
        .iter()
        .flat_map(|s| s.items.iter().map(String::as_str))
        .collect();
    let test = restrict_to_items(test, &known, min_session_len);
    if test.is_empty() {
        return Err(Error::Data("test split is empty".into()));
    }
    Ok((train, test))
}

/// Keeps the `ceil(fraction * n)` sessions with the latest `origin_time`,
/// in chronological order.
pub fn take_recent_fraction(mut train: Vec<RawSession>, fraction: f64) -> Result<Vec<RawSession>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction {fraction} not in (0, 1]")));
    }
    let n = train.len();
    let keep = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let keep = keep.min(n);
    train.sort_by_key(|s| s.origin_time);
    Ok(train.split_off(n - keep))
}
