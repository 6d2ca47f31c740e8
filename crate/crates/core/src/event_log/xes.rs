//! XES reader.
//!
//! Only the subset needed by the tool suite is interpreted: `trace` and
//! `event` elements with their direct `string`/`date`/`int`/`float`/`boolean`
//! attribute children. Any other attribute element (`id`, `list`, ...) is kept
//! as text. Log-level attributes, globals, extensions, classifiers and nested
//! attribute children are skipped.

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::{Reader, XmlVersion};

use super::timestamp::parse_timestamp;
use super::{AttributeValue, Attributes, Event, EventLog, EventLogError, Trace};

const ACTIVITY_KEY: &str = "concept:name";
const TIMESTAMP_KEY: &str = "time:timestamp";

#[derive(Default)]
struct PendingTrace {
    attributes: Attributes,
    events: Vec<Attributes>,
}

enum Scope {
    Log,
    Trace,
    Event,
    /// Anything whose children we do not interpret.
    Skipped,
}

fn line_of(doc: &str, pos: u64) -> usize {
    let end = (pos as usize).min(doc.len());
    doc.as_bytes()[..end]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn attr(
    start: &BytesStart<'_>,
    name: &str,
    doc: &str,
    pos: u64,
) -> Result<Option<String>, EventLogError> {
    for a in start.attributes() {
        let a = a.map_err(|e| EventLogError::MalformedDocument {
            line: line_of(doc, pos),
            message: e.to_string(),
        })?;
        if a.key.as_ref() as &str == name {
            let v = a.normalized_value(XmlVersion::Implicit1_0).map_err(|e| {
                EventLogError::MalformedDocument {
                    line: line_of(doc, pos),
                    message: e.to_string(),
                }
            })?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn typed_value(
    tag: &str,
    key: &str,
    raw: String,
    line: usize,
) -> Result<AttributeValue, EventLogError> {
    let invalid = |kind: &'static str, raw: &str| EventLogError::InvalidValue {
        key: key.to_string(),
        kind,
        value: raw.to_string(),
        line,
    };
    Ok(match tag {
        "string" => AttributeValue::Text(raw),
        "int" => AttributeValue::Int(raw.trim().parse().map_err(|_| invalid("int", &raw))?),
        "float" => AttributeValue::Real(raw.trim().parse().map_err(|_| invalid("float", &raw))?),
        "boolean" => match raw.trim() {
            "true" | "TRUE" | "True" | "1" => AttributeValue::Boolean(true),
            "false" | "FALSE" | "False" | "0" => AttributeValue::Boolean(false),
            _ => return Err(invalid("boolean", &raw)),
        },
        "date" => {
            AttributeValue::Instant(parse_timestamp(&raw).ok_or_else(|| invalid("date", &raw))?)
        }
        _ => AttributeValue::Text(raw),
    })
}

fn finish_trace(pending: PendingTrace, index: usize) -> Result<Trace, EventLogError> {
    let case_id = match pending.attributes.get(ACTIVITY_KEY) {
        Some(v) => v.to_string(),
        None => format!("case_{index}"),
    };
    let mut events = Vec::with_capacity(pending.events.len());
    for (event_index, mut attributes) in pending.events.into_iter().enumerate() {
        let activity = match attributes.remove(ACTIVITY_KEY) {
            Some(v) if !v.to_string().is_empty() => v.to_string(),
            _ => {
                return Err(EventLogError::MissingActivity {
                    trace: case_id,
                    event_index,
                })
            }
        };
        let timestamp = match attributes.remove(TIMESTAMP_KEY) {
            Some(AttributeValue::Instant(ts)) => ts,
            _ => {
                return Err(EventLogError::MissingTimestamp {
                    trace: case_id,
                    event_index,
                })
            }
        };
        events.push(Event {
            activity,
            timestamp,
            attributes,
        });
    }
    let mut trace = Trace {
        case_id,
        case_attributes: pending.attributes,
        events,
    };
    trace.sort_events();
    Ok(trace)
}

fn push_trace(traces: &mut Vec<Trace>, pending: PendingTrace) -> Result<(), EventLogError> {
    let trace = finish_trace(pending, traces.len())?;
    if traces.iter().any(|t| t.case_id == trace.case_id) {
        return Err(EventLogError::DuplicateCaseId(trace.case_id));
    }
    traces.push(trace);
    Ok(())
}

/// Parse an XES document into an [`EventLog`].
pub fn parse_xes(document: &str) -> Result<EventLog, EventLogError> {
    let mut reader = Reader::from_str(document);
    reader.config_mut().check_end_names = true;

    let mut scopes: Vec<Scope> = Vec::new();
    let mut pending: Option<PendingTrace> = None;
    let mut traces: Vec<Trace> = Vec::new();
    let mut seen_log = false;

    loop {
        let pos = reader.buffer_position();
        let ev = reader
            .read_event()
            .map_err(|e| EventLogError::MalformedDocument {
                line: line_of(document, reader.error_position()),
                message: e.to_string(),
            })?;
        let (start, is_empty) = match ev {
            XmlEvent::Start(s) => (s, false),
            XmlEvent::Empty(s) => (s, true),
            XmlEvent::End(_) => {
                match scopes.pop() {
                    Some(Scope::Trace) => {
                        push_trace(&mut traces, pending.take().unwrap_or_default())?;
                    }
                    Some(_) => {}
                    None => {
                        return Err(EventLogError::MalformedDocument {
                            line: line_of(document, pos),
                            message: "unexpected closing tag".into(),
                        })
                    }
                }
                continue;
            }
            XmlEvent::Eof => break,
            _ => continue,
        };

        let name: String = start.local_name().as_ref().to_string();
        let line = line_of(document, pos);
        let scope = match (scopes.last(), name.as_str()) {
            (None, "log") => {
                seen_log = true;
                Scope::Log
            }
            (None, _) => {
                return Err(EventLogError::MalformedDocument {
                    line,
                    message: format!("expected <log> root element, found <{}>", name),
                })
            }
            (Some(Scope::Log), "trace") => {
                if is_empty {
                    push_trace(&mut traces, PendingTrace::default())?;
                } else {
                    pending = Some(PendingTrace::default());
                }
                Scope::Trace
            }
            (Some(Scope::Trace), "event") => {
                if let Some(p) = pending.as_mut() {
                    p.events.push(Attributes::new());
                }
                Scope::Event
            }
            (Some(parent @ (Scope::Trace | Scope::Event)), tag) => {
                let key = attr(&start, "key", document, pos)?;
                if let Some(key) = key {
                    let raw = attr(&start, "value", document, pos)?.unwrap_or_default();
                    let value = typed_value(tag, &key, raw, line)?;
                    let p = pending.as_mut().expect("trace scope has pending trace");
                    let target = match parent {
                        Scope::Trace => &mut p.attributes,
                        _ => p.events.last_mut().expect("event scope has an event"),
                    };
                    target.insert(key, value);
                }
                Scope::Skipped
            }
            _ => Scope::Skipped,
        };
        if !is_empty {
            scopes.push(scope);
        }
    }

    if !scopes.is_empty() {
        return Err(EventLogError::MalformedDocument {
            line: line_of(document, document.len() as u64),
            message: "unexpected end of document".into(),
        });
    }
    if !seen_log {
        return Err(EventLogError::EmptyDocument);
    }
    Ok(EventLog::new("xes", traces))
}
