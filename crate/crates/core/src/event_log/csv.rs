use std::collections::HashMap;

use super::timestamp::{parse_timestamp, parse_timestamp_with};
use super::{AttributeValue, Attributes, Event, EventLog, EventLogError, Trace};

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMapping {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: String,
    /// chrono format string; `None` accepts ISO-8601.
    pub timestamp_format: Option<String>,
}

impl Default for CsvMapping {
    fn default() -> Self {
        Self {
            case_column: "case_id".into(),
            activity_column: "activity".into(),
            timestamp_column: "timestamp".into(),
            timestamp_format: None,
        }
    }
}

fn infer_scalar(raw: &str) -> AttributeValue {
    let trimmed = raw.trim();
    if let Ok(i) = trimmed.parse::<i64>() {
        return AttributeValue::Int(i);
    }
    if let Ok(r) = trimmed.parse::<f64>() {
        if r.is_finite() {
            return AttributeValue::Real(r);
        }
    }
    match trimmed {
        "true" | "TRUE" | "True" => AttributeValue::Boolean(true),
        "false" | "FALSE" | "False" => AttributeValue::Boolean(false),
        _ => AttributeValue::Text(raw.to_string()),
    }
}

/// Parse a CSV document (header row mandatory, RFC-4180 quoting) into an
/// [`EventLog`].
///
/// Rows are grouped by the case column in first-appearance order. Every
/// unmapped, non-empty cell becomes an event attribute; columns whose value is
/// the same on every row of a case are also lifted into the case attributes,
/// so case-level predicates work on flat CSV exports.
pub fn parse_csv(document: &str, mapping: &CsvMapping) -> Result<EventLog, EventLogError> {
    if document.trim().is_empty() {
        return Err(EventLogError::EmptyDocument);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(document.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(&e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| EventLogError::MissingColumn(name.to_string()))
    };
    let case_idx = column(&mapping.case_column)?;
    let activity_idx = column(&mapping.activity_column)?;
    let ts_idx = column(&mapping.timestamp_column)?;

    let mut order: Vec<String> = Vec::new();
    let mut events: HashMap<String, Vec<Event>> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| malformed(&e))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let case_id = field(case_idx).trim().to_string();
        let activity = field(activity_idx).trim().to_string();
        if case_id.is_empty() || activity.is_empty() {
            return Err(EventLogError::MalformedDocument {
                line: row as usize,
                message: "empty case id or activity".into(),
            });
        }
        let raw_ts = field(ts_idx);
        let timestamp = match &mapping.timestamp_format {
            Some(fmt) => parse_timestamp_with(raw_ts, fmt),
            None => parse_timestamp(raw_ts),
        }
        .ok_or_else(|| EventLogError::UnparsableTimestamp {
            row,
            value: raw_ts.to_string(),
        })?;
        let attributes: Attributes = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![case_idx, activity_idx, ts_idx].contains(i))
            .filter_map(|(i, h)| {
                let v = record.get(i)?;
                (!v.is_empty()).then(|| (h.trim().to_string(), infer_scalar(v)))
            })
            .collect();
        if !events.contains_key(&case_id) {
            order.push(case_id.clone());
        }
        events.entry(case_id).or_default().push(Event {
            activity,
            timestamp,
            attributes,
        });
    }

    let traces = order
        .into_iter()
        .map(|case_id| {
            let events = events.remove(&case_id).unwrap_or_default();
            let mut trace = Trace {
                case_attributes: case_constant_attributes(&events),
                case_id,
                events,
            };
            trace.sort_events();
            trace
        })
        .collect();
    Ok(EventLog::new("csv", traces))
}

fn case_constant_attributes(events: &[Event]) -> Attributes {
    let Some((first, rest)) = events.split_first() else {
        return Attributes::new();
    };
    first
        .attributes
        .iter()
        .filter(|(k, v)| rest.iter().all(|e| e.attributes.get(*k) == Some(*v)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn malformed(e: &csv::Error) -> EventLogError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    EventLogError::MalformedDocument {
        line,
        message: e.to_string(),
    }
}
