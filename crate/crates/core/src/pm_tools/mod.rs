//! Process-mining tools: deterministic partial functions from the workflow
//! state to text, each carrying the documentation string an agent reads when
//! choosing among them.
//!
//! Tools receive the full previous state. Arguments travel inside that state
//! as directive lines (`predicate: ...`, `store_as: ...`, `groups: ...`,
//! `top_k: ...`) and log references (`@key` or a `.xes`/`.csv` path). A tool
//! never aborts a workflow: failures come back as text starting with
//! [`TOOL_ERROR_PREFIX`].

mod abstraction;
mod builtin;
mod reference;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{EntityMemory, MemoryError};
use crate::event_log::{EventLogError, PredicateError};

pub use self::abstraction::{abstract_dfg, abstract_variants, render_comparison};
pub use self::builtin::{
    builtin_registry, DEFAULT_DFG_TOP_K, DEFAULT_FINDINGS_LIMIT, DEFAULT_VARIANTS_TOP_K,
};
pub use self::reference::{directive, resolve_log_reference};

pub const TOOL_ERROR_PREFIX: &str = "TOOL-ERROR:";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("no event log reference (@key or .xes/.csv path) found in the state")]
    NoLogReference,
    #[error("entity '@{0}' does not hold an event log")]
    NotALog(String),
    #[error("missing directive '{0}:'")]
    MissingDirective(&'static str),
    #[error("invalid directive '{directive}:': {message}")]
    InvalidDirective {
        directive: &'static str,
        message: String,
    },
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Log(#[from] EventLogError),
    #[error("predicate: {0}")]
    Predicate(#[from] PredicateError),
}

pub type ToolFn = dyn Fn(&str, &mut EntityMemory) -> Result<String, ToolError> + Send + Sync;

#[derive(Clone)]
pub struct Tool {
    name: String,
    documentation: String,
    function: Arc<ToolFn>,
}

impl Tool {
    pub fn new<F>(name: impl Into<String>, documentation: impl Into<String>, function: F) -> Self
    where
        F: Fn(&str, &mut EntityMemory) -> Result<String, ToolError> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            documentation: documentation.into(),
            function: Arc::new(function),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documentation(&self) -> &str {
        &self.documentation
    }

    /// Run the tool; errors are rendered in-band as `TOOL-ERROR: <message>`.
    pub fn invoke(&self, state: &str, memory: &mut EntityMemory) -> String {
        match self.try_invoke(state, memory) {
            Ok(out) => out,
            Err(e) => format!("{TOOL_ERROR_PREFIX} {e}"),
        }
    }

    pub fn try_invoke(&self, state: &str, memory: &mut EntityMemory) -> Result<String, ToolError> {
        (self.function)(state, memory)
    }
}

impl fmt::Debug for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tool")
            .field("name", &self.name)
            .field("documentation", &self.documentation)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("tool '{0}' is already registered")]
pub struct DuplicateTool(pub String);

/// Named tool set backing the per-task tool bindings of a workflow.
#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Tool>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: Tool) -> Result<(), DuplicateTool> {
        if self.tools.contains_key(tool.name()) {
            return Err(DuplicateTool(tool.name().to_string()));
        }
        self.tools.insert(tool.name().to_string(), tool);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tool> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    pub fn tools(&self) -> impl Iterator<Item = &Tool> {
        self.tools.values()
    }
}
