use std::io::{BufRead, BufReader, Read};

use log::warn;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{EventType, InteractionEvent, PlayerId};
use crate::error::{Error, Result};

/// Share of malformed records above which a log is rejected outright.
const MAX_MALFORMED_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" | "ndjson" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(format!("unknown log format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    /// 1-based line (JSONL) or record (CSV) number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    /// Sorted by `occurred_at`; ties keep file order.
    pub events: Vec<InteractionEvent>,
    pub skipped: Vec<SkippedRecord>,
    pub total_records: usize,
}

/// Wire form of one `events.jsonl` line.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub(crate) struct EventRecord {
    pub ts: i64,
    pub actor: String,
    #[serde(default)]
    pub target: Option<String>,
    pub event: String,
    #[serde(default)]
    pub value: Option<f64>,
}

impl EventRecord {
    pub(crate) fn from_event(e: &InteractionEvent) -> Self {
        EventRecord {
            ts: e.occurred_at,
            actor: e.actor.clone(),
            target: e.target.clone(),
            event: e.event_type.as_str().to_owned(),
            value: e.value,
        }
    }

    fn into_event(self) -> std::result::Result<InteractionEvent, String> {
        if self.actor.is_empty() {
            return Err("empty actor".into());
        }
        let target = self.target.filter(|t| !t.is_empty());
        if target.as_deref() == Some(self.actor.as_str()) {
            return Err("actor equals target".into());
        }
        let event_type: EventType = self.event.parse()?;
        if let Some(v) = self.value {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("invalid value {v}"));
            }
        }
        Ok(InteractionEvent {
            occurred_at: self.ts,
            actor: self.actor,
            target,
            event_type,
            value: self.value,
        })
    }
}

/// Writes events as `events.jsonl` lines.
pub fn write_events<W: std::io::Write>(mut w: W, events: &[InteractionEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, &EventRecord::from_event(e))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads an interaction log. Malformed records are skipped and reported
/// unless they exceed 10% of the input.
pub fn parse_events<R: Read>(reader: R, format: LogFormat) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let accept = |line: usize, rec: std::result::Result<EventRecord, String>, out: &mut ParsedLog| {
        out.total_records += 1;
        match rec.and_then(EventRecord::into_event) {
            Ok(ev) => out.events.push(ev),
            Err(reason) => out.skipped.push(SkippedRecord { line, reason }),
        }
    };

    match format {
        LogFormat::Jsonl => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec = serde_json::from_str::<EventRecord>(&line).map_err(|e| e.to_string());
                accept(i + 1, rec, &mut out);
            }
        }
        LogFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
            let headers = rdr.headers()?.clone();
            for (i, row) in rdr.records().enumerate() {
                let row = match row {
                    Ok(r) => r,
                    Err(e) if e.is_io_error() => return Err(e.into()),
                    Err(e) => {
                        accept(i + 2, Err(e.to_string()), &mut out);
                        continue;
                    }
                };
                let rec = csv_record(&headers, &row);
                accept(i + 2, rec, &mut out);
            }
        }
    }

    if out.total_records > 0 {
        let share = out.skipped.len() as f64 / out.total_records as f64;
        if share > MAX_MALFORMED_SHARE {
            return Err(Error::TooManyMalformed {
                malformed: out.skipped.len(),
                total: out.total_records,
                lines: out.skipped.iter().take(20).map(|s| s.line).collect(),
            });
        }
    }
    for s in &out.skipped {
        warn!("skipping record {}: {}", s.line, s.reason);
    }
    out.events.sort_by_key(|e| e.occurred_at);
    Ok(out)
}

fn csv_record(headers: &csv::StringRecord, row: &csv::StringRecord) -> std::result::Result<EventRecord, String> {
    let field = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .and_then(|i| row.get(i))
            .filter(|v| !v.is_empty())
    };
    let ts = field("ts").ok_or("missing ts")?.parse::<i64>().map_err(|e| e.to_string())?;
    let actor = field("actor").ok_or("missing actor")?.to_owned();
    let event = field("event").ok_or("missing event")?.to_owned();
    let value = match field("value") {
        Some(v) => Some(v.parse::<f64>().map_err(|e| e.to_string())?),
        None => None,
    };
    Ok(EventRecord {
        ts,
        actor,
        target: field("target").map(str::to_owned),
        event,
        value,
    })
}

/// Companion in-game status sample for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StatusRecord {
    pub ts: i64,
    pub player: PlayerId,
    #[serde(default)]
    pub cash: f64,
    #[serde(default)]
    pub grade: f64,
    #[serde(default)]
    pub combat: f64,
}

/// Reads `status.jsonl`; same malformed-record policy as [`parse_events`].
pub fn parse_status<R: Read>(reader: R) -> Result<Vec<StatusRecord>> {
    let mut records = Vec::new();
    let mut bad = Vec::new();
    let mut total = 0usize;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match serde_json::from_str::<StatusRecord>(&line) {
            Ok(r) if !r.player.is_empty() => records.push(r),
            _ => bad.push(i + 1),
        }
    }
    if total > 0 && bad.len() as f64 / total as f64 > MAX_MALFORMED_SHARE {
        return Err(Error::TooManyMalformed {
            malformed: bad.len(),
            total,
            lines: bad.into_iter().take(20).collect(),
        });
    }
    records.sort_by_key(|r| r.ts);
    Ok(records)
}
