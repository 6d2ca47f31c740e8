//! Workflow representation, validation, linearization and sequential
//! execution.
//!
//! The state is a single string. Each executed task appends its response as
//! a labeled section (see [`append_state`]), so every state is a prefix of
//! the next one and guards, ensembles and tests can find a task's output.

mod callbacks;
mod execute;
mod memory;
mod spec;
mod validate;

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::agents::AgentError;
use crate::task_kinds::TaskKindError;

pub use self::callbacks::{run_callbacks, Callback, CallbackError};
pub use self::execute::{
    execute, Attempt, Backends, ExecutionFailure, ExecutionRecord, TaskDetail, SKIPPED,
};
pub use self::memory::{EntityMemory, MemoryError, MemoryValue};
pub use self::spec::{ConfigError, EvaluatorConfig, TaskSpec, WorkflowSpec, SCHEMA_VERSION};
pub use self::validate::{validate, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid workflow: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidWorkflow(Vec<Violation>),
    #[error("task '{task}': {source}")]
    Agent { task: String, source: AgentError },
    #[error("task '{task}': {source}")]
    Protocol { task: String, source: TaskKindError },
    #[error("task '{task}': router chose '{route}', which is none of {options:?}")]
    UnknownRoute {
        task: String,
        route: String,
        options: Vec<String>,
    },
    #[error(transparent)]
    Callback(#[from] CallbackError),
}

/// A topological order of all tasks, taking the smallest ready id first.
pub fn linearize(spec: &WorkflowSpec) -> Result<Vec<String>, EngineError> {
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(EngineError::InvalidWorkflow(violations));
    }
    Ok(validate::topological_order(spec).0)
}

fn header(task_id: &str) -> String {
    format!("=== output of {task_id} ===")
}

/// `previous`, a newline, the section header of `task_id`, a newline and
/// `addition`.
pub fn append_state(previous: &str, task_id: &str, addition: &str) -> String {
    let header = header(task_id);
    let mut s = String::with_capacity(previous.len() + header.len() + addition.len() + 2);
    s.push_str(previous);
    s.push('\n');
    s.push_str(&header);
    s.push('\n');
    s.push_str(addition);
    s
}

static SECTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\n=== output of (.+?) ===\n").expect("static regex"));

/// Split a state into the inquiry and its `(task_id, body)` sections.
pub fn sections(state: &str) -> (&str, Vec<(&str, &str)>) {
    let headers: Vec<_> = SECTION.captures_iter(state).collect();
    let inquiry_end = headers
        .first()
        .map_or(state.len(), |c| c.get(0).expect("match").start());
    let mut out = Vec::with_capacity(headers.len());
    for (i, cap) in headers.iter().enumerate() {
        let whole = cap.get(0).expect("match");
        let end = headers
            .get(i + 1)
            .map_or(state.len(), |n| n.get(0).expect("match").start());
        out.push((
            cap.get(1).expect("group").as_str(),
            &state[whole.end()..end],
        ));
    }
    (&state[..inquiry_end], out)
}

/// Body of the last section labeled `task_id`.
pub fn last_section<'s>(state: &'s str, task_id: &str) -> Option<&'s str> {
    sections(state)
        .1
        .into_iter()
        .rev()
        .find(|(id, _)| *id == task_id)
        .map(|(_, body)| body)
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::sync::Arc;

    use super::*;
    use crate::agents::AgentProfile;
    use crate::pm_tools::builtin_registry;
    use crate::task_kinds::TaskKind;

    /// Plain tasks named `ids`, edges `(from, to)`, one agent `a`.
    pub fn spec_with(
        ids: &[&str],
        edges: &[(&str, &str)],
        initial: &str,
        last: &str,
    ) -> WorkflowSpec {
        let mut prec =
            std::collections::BTreeMap::<String, std::collections::BTreeSet<String>>::new();
        for (from, to) in edges {
            prec.entry(to.to_string())
                .or_default()
                .insert(from.to_string());
        }
        WorkflowSpec {
            tasks: ids
                .iter()
                .map(|id| TaskSpec::new(*id, TaskKind::Plain, "a", format!("Do {id}."), "Text."))
                .collect(),
            prec,
            initial_task: initial.into(),
            final_task: last.into(),
            agents: vec![AgentProfile::new("a", "You are a process analyst.")],
            registry: Arc::new(builtin_registry()),
        }
    }

    pub fn fig2_spec() -> WorkflowSpec {
        spec_with(
            &["T1", "T2", "T3", "T4"],
            &[("T1", "T2"), ("T1", "T3"), ("T2", "T4"), ("T3", "T4")],
            "T1",
            "T4",
        )
    }
}
