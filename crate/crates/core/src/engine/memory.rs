use std::collections::BTreeMap;
use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::event_log::EventLog;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("entity key '@{0}' is already stored")]
    DuplicateKey(String),
    #[error("unknown entity key '@{0}'")]
    UnknownEntityKey(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemoryValue {
    Log(Arc<EventLog>),
    Text(String),
}

impl From<EventLog> for MemoryValue {
    fn from(log: EventLog) -> Self {
        MemoryValue::Log(Arc::new(log))
    }
}

impl From<String> for MemoryValue {
    fn from(text: String) -> Self {
        MemoryValue::Text(text)
    }
}

impl From<&str> for MemoryValue {
    fn from(text: &str) -> Self {
        MemoryValue::Text(text.to_string())
    }
}

/// Write-once key/value store that carries artifacts between tasks of one
/// execution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityMemory {
    entries: BTreeMap<String, MemoryValue>,
}

impl EntityMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn store(
        &mut self,
        key: impl Into<String>,
        value: impl Into<MemoryValue>,
    ) -> Result<(), MemoryError> {
        let key = key.into();
        if self.entries.contains_key(&key) {
            return Err(MemoryError::DuplicateKey(key));
        }
        self.entries.insert(key, value.into());
        Ok(())
    }

    pub fn load(&self, key: &str) -> Result<&MemoryValue, MemoryError> {
        self.entries
            .get(key)
            .ok_or_else(|| MemoryError::UnknownEntityKey(key.to_string()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ValueSummary<'a> {
    EventLog {
        source_name: &'a str,
        trace_count: usize,
        event_count: usize,
        case_ids: Vec<&'a str>,
    },
    Text {
        value: &'a str,
    },
}

// Logs are summarized (cases, counts) rather than dumped into transcripts.
impl Serialize for EntityMemory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for (key, value) in &self.entries {
            let summary = match value {
                MemoryValue::Log(log) => ValueSummary::EventLog {
                    source_name: &log.source_name,
                    trace_count: log.traces.len(),
                    event_count: log.event_count(),
                    case_ids: log.traces.iter().map(|t| t.case_id.as_str()).collect(),
                },
                MemoryValue::Text(value) => ValueSummary::Text { value },
            };
            map.serialize_entry(key, &summary)?;
        }
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_then_load() {
        let mut m = EntityMemory::new();
        let log = EventLog::new("x", vec![]);
        m.store("protected", log.clone()).unwrap();
        assert_eq!(
            m.load("protected").unwrap(),
            &MemoryValue::Log(Arc::new(log))
        );
    }

    #[test]
    fn write_once() {
        let mut m = EntityMemory::new();
        m.store("k", "a").unwrap();
        assert_eq!(
            m.store("k", "b"),
            Err(MemoryError::DuplicateKey("k".into()))
        );
        assert_eq!(m.load("k").unwrap(), &MemoryValue::Text("a".into()));
    }

    #[test]
    fn unknown_key() {
        let m = EntityMemory::new();
        assert_eq!(
            m.load("missing"),
            Err(MemoryError::UnknownEntityKey("missing".into()))
        );
    }

    #[test]
    fn serializes_log_summaries() {
        let mut m = EntityMemory::new();
        m.store("log", EventLog::new("fixture", vec![])).unwrap();
        m.store("note", "hello").unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["log"]["type"], "event_log");
        assert_eq!(json["log"]["trace_count"], 0);
        assert_eq!(json["note"]["value"], "hello");
    }
}
