use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentProfile;
use crate::pm_tools::ToolRegistry;
use crate::task_kinds::{RouterGuard, TaskKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read workflow file '{path}': {message}")]
    Io { path: String, message: String },
    #[error("invalid workflow document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedSchemaVersion(u32),
}

fn default_max_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    pub threshold: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(rename = "target")]
    pub target_task_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub agent_id: String,
    pub instruction: String,
    pub expected_output: String,
    pub tool_names: BTreeSet<String>,
    pub guard: Option<RouterGuard>,
    pub callback_names: Vec<String>,
    pub evaluator: Option<EvaluatorConfig>,
}

impl TaskSpec {
    pub fn new(
        id: impl Into<String>,
        kind: TaskKind,
        agent_id: impl Into<String>,
        instruction: impl Into<String>,
        expected_output: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            kind,
            agent_id: agent_id.into(),
            instruction: instruction.into(),
            expected_output: expected_output.into(),
            tool_names: BTreeSet::new(),
            guard: None,
            callback_names: Vec::new(),
            evaluator: None,
        }
    }

    pub fn with_tools<I, S>(mut self, tools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tool_names.extend(tools.into_iter().map(Into::into));
        self
    }
}

/// A workflow: tasks, their precedence relation, the agents executing them
/// and the tools they may select.
#[derive(Debug, Clone)]
pub struct WorkflowSpec {
    /// In declaration order.
    pub tasks: Vec<TaskSpec>,
    /// `prec[b]` holds the tasks that must run before `b`.
    pub prec: BTreeMap<String, BTreeSet<String>>,
    pub initial_task: String,
    pub final_task: String,
    pub agents: Vec<AgentProfile>,
    pub registry: Arc<ToolRegistry>,
}

impl WorkflowSpec {
    pub fn task(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentProfile> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn predecessors(&self, id: &str) -> impl Iterator<Item = &str> {
        self.prec.get(id).into_iter().flatten().map(String::as_str)
    }

    /// Route tokens of the tasks guarded by `router_id`, sorted.
    pub fn route_options(&self, router_id: &str) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .tasks
            .iter()
            .filter_map(|t| t.guard.as_ref())
            .filter(|g| g.router_task_id == router_id)
            .map(|g| g.expected_route_token.as_str())
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn from_json(text: &str, registry: Arc<ToolRegistry>) -> Result<Self, ConfigError> {
        let doc: WorkflowDocument = serde_json::from_str(text)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::UnsupportedSchemaVersion(doc.schema_version));
        }
        let mut prec = BTreeMap::new();
        let tasks = doc
            .tasks
            .into_iter()
            .map(|t| {
                if !t.prec.is_empty() {
                    prec.entry(t.id.clone())
                        .or_insert_with(BTreeSet::new)
                        .extend(t.prec);
                }
                TaskSpec {
                    id: t.id,
                    kind: t.kind,
                    agent_id: t.agent,
                    instruction: t.instruction,
                    expected_output: t.expected_output,
                    tool_names: t.tools,
                    guard: t.guard,
                    callback_names: t.callbacks,
                    evaluator: t.evaluator,
                }
            })
            .collect();
        Ok(Self {
            tasks,
            prec,
            initial_task: doc.initial_task,
            final_task: doc.final_task,
            agents: doc.agents,
            registry,
        })
    }

    pub fn from_path(
        path: impl AsRef<Path>,
        registry: Arc<ToolRegistry>,
    ) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, registry)
    }

    /// The workflow document this spec was (or could have been) loaded from.
    pub fn to_json(&self) -> String {
        let doc = WorkflowDocument {
            schema_version: SCHEMA_VERSION,
            description: None,
            agents: self.agents.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskDocument {
                    id: t.id.clone(),
                    kind: t.kind,
                    agent: t.agent_id.clone(),
                    instruction: t.instruction.clone(),
                    expected_output: t.expected_output.clone(),
                    tools: t.tool_names.clone(),
                    prec: self.prec.get(&t.id).cloned().unwrap_or_default(),
                    guard: t.guard.clone(),
                    callbacks: t.callback_names.clone(),
                    evaluator: t.evaluator.clone(),
                })
                .collect(),
            initial_task: self.initial_task.clone(),
            final_task: self.final_task.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("workflow documents always serialize")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkflowDocument {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    agents: Vec<AgentProfile>,
    tasks: Vec<TaskDocument>,
    initial_task: String,
    final_task: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDocument {
    id: String,
    #[serde(default = "plain")]
    kind: TaskKind,
    agent: String,
    instruction: String,
    expected_output: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    tools: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    prec: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<RouterGuard>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    callbacks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evaluator: Option<EvaluatorConfig>,
}

fn plain() -> TaskKind {
    TaskKind::Plain
}
