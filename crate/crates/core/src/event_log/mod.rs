//! Event logs and the deterministic process-mining artifacts computed from them.
//!
//! Logs are parsed from XES or CSV into [`EventLog`]; everything downstream
//! ([`Dfg`], [`VariantTable`], [`DfgComparison`], log splitting) is a pure
//! function of an already parsed log.

mod compare;
mod csv;
mod dfg;
mod predicate;
mod timestamp;
mod variants;
mod xes;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use serde::Serialize;
use thiserror::Error;

pub use self::compare::{
    compare_dfgs, compare_dfgs_with, CompareOptions, DfgComparison, Finding, FindingKind,
    DEFAULT_DURATION_THRESHOLD, DEFAULT_SHIFT_THRESHOLD,
};
pub use self::csv::{parse_csv, CsvMapping};
pub use self::dfg::{discover_dfg, Dfg, EdgeStats};
pub use self::predicate::{parse_predicate, CasePredicate, Comparison, Operator, PredicateError};
pub use self::timestamp::parse_timestamp;
pub use self::variants::{discover_variants, Variant, VariantTable};
pub use self::xes::parse_xes;

/// Timestamps carry their source offset; naive inputs are read as UTC.
pub type Timestamp = DateTime<FixedOffset>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventLogError {
    #[error("malformed document at line {line}: {message}")]
    MalformedDocument { line: usize, message: String },
    #[error("event {event_index} of trace '{trace}' has no concept:name")]
    MissingActivity { trace: String, event_index: usize },
    #[error("event {event_index} of trace '{trace}' has no time:timestamp")]
    MissingTimestamp { trace: String, event_index: usize },
    #[error("invalid {kind} value '{value}' for key '{key}' at line {line}")]
    InvalidValue {
        key: String,
        kind: &'static str,
        value: String,
        line: usize,
    },
    #[error("case id '{0}' appears in more than one trace")]
    DuplicateCaseId(String),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("unparsable timestamp '{value}' in row {row}")]
    UnparsableTimestamp { row: u64, value: String },
    #[error("empty document")]
    EmptyDocument,
    #[error("cannot read '{path}': {message}")]
    Io { path: String, message: String },
}

/// A scalar attribute value as found in XES attribute elements or CSV cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum AttributeValue {
    Text(String),
    Int(i64),
    Real(f64),
    Boolean(bool),
    Instant(Timestamp),
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => f.write_str(s),
            AttributeValue::Int(i) => write!(f, "{i}"),
            AttributeValue::Real(r) => write!(f, "{r}"),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Instant(t) => write!(f, "{}", t.to_rfc3339()),
        }
    }
}

pub type Attributes = BTreeMap<String, AttributeValue>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub activity: String,
    pub timestamp: Timestamp,
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub case_id: String,
    pub case_attributes: Attributes,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.activity.as_str())
    }

    /// Stable sort by timestamp, so equal timestamps keep document order.
    pub(crate) fn sort_events(&mut self) {
        self.events.sort_by_key(|e| e.timestamp);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub source_name: String,
}

impl EventLog {
    pub fn new(source_name: impl Into<String>, traces: Vec<Trace>) -> Self {
        Self {
            traces,
            source_name: source_name.into(),
        }
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Load a log from disk, choosing the parser by extension (`.xes` or `.csv`).
    ///
    /// CSV files use [`CsvMapping::default`].
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EventLogError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| EventLogError::Io {
            path: display.clone(),
            message: e.to_string(),
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        let mut log = match ext.as_deref() {
            Some("csv") => parse_csv(&text, &CsvMapping::default())?,
            _ => parse_xes(&text)?,
        };
        log.source_name = display;
        Ok(log)
    }

    /// Split into (traces satisfying `predicate`, remainder), preserving order.
    pub fn split(&self, predicate: &CasePredicate) -> (EventLog, EventLog) {
        split_log(self, predicate)
    }
}

/// Partition a log by a case-level predicate. The first log is the matching
/// (protected) group, the second the remainder.
pub fn split_log(log: &EventLog, predicate: &CasePredicate) -> (EventLog, EventLog) {
    let (matching, rest): (Vec<_>, Vec<_>) = log
        .traces
        .iter()
        .cloned()
        .partition(|t| predicate.matches(t));
    (
        EventLog::new(format!("{}[{}]", log.source_name, predicate), matching),
        EventLog::new(format!("{}[not {}]", log.source_name, predicate), rest),
    )
}
