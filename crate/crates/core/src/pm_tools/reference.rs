use std::sync::{Arc, LazyLock};

use regex::Regex;

use super::ToolError;
use crate::engine::{EntityMemory, MemoryValue};
use crate::event_log::EventLog;

// '@' must not follow a word character, so e-mail addresses are not references.
static ENTITY_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:^|[^A-Za-z0-9_.@])@([A-Za-z_][A-Za-z0-9_\-]*)").unwrap());
static PATH_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)[^\s"'`()<>\[\]{},;@]+\.(?:xes|csv)\b"#).unwrap());

#[derive(Debug, PartialEq)]
enum LogReference<'a> {
    Entity(&'a str),
    Path(&'a str),
}

fn last_reference(state: &str) -> Option<LogReference<'_>> {
    let entity = ENTITY_REF.captures_iter(state).last().map(|c| {
        let key = c.get(1).expect("group 1 always participates");
        // offset of the '@'
        (key.start() - 1, LogReference::Entity(key.as_str()))
    });
    let path = PATH_REF
        .find_iter(state)
        .last()
        .map(|m| (m.start(), LogReference::Path(m.as_str())));
    match (entity, path) {
        (Some(e), Some(p)) => Some(if e.0 > p.0 { e.1 } else { p.1 }),
        (e, p) => e.or(p).map(|(_, r)| r),
    }
}

/// Locate the event log a tool should work on: the last `@key` entity
/// reference or `.xes`/`.csv` path mentioned in the state.
pub fn resolve_log_reference(
    state: &str,
    memory: &EntityMemory,
) -> Result<Arc<EventLog>, ToolError> {
    match last_reference(state).ok_or(ToolError::NoLogReference)? {
        LogReference::Entity(key) => load_log(memory, key),
        LogReference::Path(path) => Ok(Arc::new(EventLog::from_path(path)?)),
    }
}

pub(crate) fn load_log(memory: &EntityMemory, key: &str) -> Result<Arc<EventLog>, ToolError> {
    match memory.load(key)? {
        MemoryValue::Log(log) => Ok(Arc::clone(log)),
        MemoryValue::Text(_) => Err(ToolError::NotALog(key.to_string())),
    }
}

/// Value of the last `name: value` directive line in the state.
pub fn directive<'a>(state: &'a str, name: &str) -> Option<&'a str> {
    state.lines().rev().find_map(|line| {
        let rest = line.trim_start().strip_prefix(name)?;
        rest.strip_prefix(':').map(str::trim)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::Trace;

    fn mem_with(key: &str, traces: usize) -> EntityMemory {
        let mut m = EntityMemory::new();
        let traces = (0..traces)
            .map(|i| Trace {
                case_id: format!("c{i}"),
                case_attributes: Default::default(),
                events: vec![],
            })
            .collect();
        m.store(key, EventLog::new(key, traces)).unwrap();
        m
    }

    #[test]
    fn finds_path() {
        assert_eq!(
            last_reference("Tell me the violations in the event log at /home/erik/p2p.xes."),
            Some(LogReference::Path("/home/erik/p2p.xes"))
        );
        assert_eq!(
            last_reference("see \"data/log.CSV\" please"),
            Some(LogReference::Path("data/log.CSV"))
        );
        assert_eq!(last_reference("a file.xesx"), None);
    }

    #[test]
    fn later_reference_wins() {
        assert_eq!(
            last_reference("log at /a.xes, then @protected"),
            Some(LogReference::Entity("protected"))
        );
        assert_eq!(
            last_reference("@protected first, then /a.xes"),
            Some(LogReference::Path("/a.xes"))
        );
        assert_eq!(
            last_reference("groups: @k1,@k2"),
            Some(LogReference::Entity("k2"))
        );
    }

    #[test]
    fn emails_are_not_references() {
        assert_eq!(last_reference("mail erik@example.org"), None);
    }

    #[test]
    fn resolves_from_memory() {
        let m = mem_with("protected", 3);
        let log = resolve_log_reference("analyze @protected now", &m).unwrap();
        assert_eq!(log.traces.len(), 3);
    }

    #[test]
    fn resolve_errors() {
        let m = EntityMemory::new();
        assert_eq!(
            resolve_log_reference("nothing here", &m).unwrap_err(),
            ToolError::NoLogReference
        );
        assert!(matches!(
            resolve_log_reference("use @ghost", &m).unwrap_err(),
            ToolError::Memory(_)
        ));
        assert!(matches!(
            resolve_log_reference("open /definitely/not/here.xes", &m).unwrap_err(),
            ToolError::Log(_)
        ));
        let mut m = EntityMemory::new();
        m.store("note", "text").unwrap();
        assert_eq!(
            resolve_log_reference("@note", &m).unwrap_err(),
            ToolError::NotALog("note".into())
        );
    }

    #[test]
    fn directives_last_wins() {
        let state = "predicate: a = 1\nother\n  predicate:  b = 2  \npredicates: x";
        assert_eq!(directive(state, "predicate"), Some("b = 2"));
        assert_eq!(directive(state, "groups"), None);
    }
}
