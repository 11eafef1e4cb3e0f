use std::io::BufRead;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One click: which session, when (epoch milliseconds), which item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub session_id: String,
    pub timestamp: i64,
    pub item_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// RFC 3339 / ISO-8601 with offset, e.g. `2014-04-07T10:51:09.277Z`.
    Iso8601,
    EpochMillis,
    EpochSeconds,
    /// `YYYY-MM-DD`, taken as midnight UTC.
    Date,
}

/// Column mapping for a delimited click log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventFormat {
    pub delimiter: char,
    pub has_header: bool,
    pub session_col: usize,
    pub time_col: usize,
    pub item_col: usize,
    pub time_format: TimeFormat,
    /// Parsing fails when more than this fraction of lines is malformed.
    pub max_malformed_fraction: f64,
}

impl Default for EventFormat {
    fn default() -> Self {
        Self::yoochoose()
    }
}

impl EventFormat {
    /// `yoochoose-clicks.dat`: `session,timestamp,item,category`.
    pub fn yoochoose() -> Self {
        Self {
            delimiter: ',',
            has_header: false,
            session_col: 0,
            time_col: 1,
            item_col: 2,
            time_format: TimeFormat::Iso8601,
            max_malformed_fraction: 0.01,
        }
    }

    /// `train-item-views.csv`: `sessionId;userId;itemId;timeframe;eventdate`.
    pub fn diginetica() -> Self {
        Self {
            delimiter: ';',
            has_header: true,
            session_col: 0,
            time_col: 4,
            item_col: 2,
            time_format: TimeFormat::Date,
            max_malformed_fraction: 0.01,
        }
    }
}

pub fn parse_timestamp(field: &str, format: TimeFormat) -> Option<i64> {
    let field = field.trim();
    let ms = match format {
        TimeFormat::Iso8601 => DateTime::parse_from_rfc3339(field).ok()?.timestamp_millis(),
        TimeFormat::EpochMillis => field.parse::<i64>().ok()?,
        TimeFormat::EpochSeconds => field.parse::<i64>().ok()?.checked_mul(1000)?,
        TimeFormat::Date => NaiveDate::parse_from_str(field, "%Y-%m-%d")
            .ok()?
            .and_hms_opt(0, 0, 0)?
            .and_utc()
            .timestamp_millis(),
    };
    (ms >= 0).then_some(ms)
}

#[derive(Debug, Clone, Default)]
pub struct ParsedEvents {
    pub events: Vec<RawEvent>,
    /// Non-empty data lines seen (header excluded).
    pub lines: usize,
    pub malformed: usize,
}

fn parse_line(line: &str, fmt: &EventFormat) -> Option<RawEvent> {
    let fields: Vec<&str> = line.split(fmt.delimiter).collect();
    let get = |i: usize| fields.get(i).map(|s| s.trim()).filter(|s| !s.is_empty());
    let session_id = get(fmt.session_col)?;
    let item_id = get(fmt.item_col)?;
    let timestamp = parse_timestamp(get(fmt.time_col)?, fmt.time_format)?;
    Some(RawEvent {
        session_id: session_id.to_string(),
        timestamp,
        item_id: item_id.to_string(),
    })
}

/// Reads click events in file order. Malformed lines are skipped and
/// counted; too many of them is an error.
pub fn parse_events<R: BufRead>(reader: R, fmt: &EventFormat) -> Result<ParsedEvents> {
    let mut out = ParsedEvents::default();
    let mut header_pending = fmt.has_header;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        out.lines += 1;
        match parse_line(line, fmt) {
            Some(ev) => out.events.push(ev),
            None => out.malformed += 1,
        }
    }
    if out.lines > 0 && out.malformed as f64 > fmt.max_malformed_fraction * out.lines as f64 {
        return Err(Error::Data(format!(
            "{} of {} lines malformed (limit {:.2}%)",
            out.malformed,
            out.lines,
            fmt.max_malformed_fraction * 100.0
        )));
    }
    Ok(out)
}
