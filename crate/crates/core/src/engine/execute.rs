use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::callbacks::run_callbacks;
use super::memory::EntityMemory;
use super::spec::{TaskSpec, WorkflowSpec};
use super::{append_state, linearize, EngineError};
use crate::agents::{complete, select_tool, AgentError, CompletionBackend};
use crate::pm_tools::{Tool, TOOL_ERROR_PREFIX};
use crate::task_kinds::{
    apply_wrap_back, build_prompt, parse_route, parse_score, TaskKind, ToolOutput, WrapBackDecision,
};

/// Text appended to the state for a task skipped by its router guard.
pub const SKIPPED: &str = "SKIPPED";

/// Completion backends per agent, with a default for agents without one.
#[derive(Clone)]
pub struct Backends {
    default: Arc<dyn CompletionBackend>,
    per_agent: BTreeMap<String, Arc<dyn CompletionBackend>>,
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("per_agent", &self.per_agent.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Backends {
    pub fn new(default: Arc<dyn CompletionBackend>) -> Self {
        Self {
            default,
            per_agent: BTreeMap::new(),
        }
    }

    pub fn single(backend: impl CompletionBackend + 'static) -> Self {
        Self::new(Arc::new(backend))
    }

    pub fn with_agent(
        mut self,
        agent_id: impl Into<String>,
        backend: Arc<dyn CompletionBackend>,
    ) -> Self {
        self.per_agent.insert(agent_id.into(), backend);
        self
    }

    pub fn for_agent(&self, agent_id: &str) -> &dyn CompletionBackend {
        self.per_agent
            .get(agent_id)
            .unwrap_or(&self.default)
            .as_ref()
    }
}

/// An execution of a task that a later evaluator sent back for a retry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub selected_tool: Option<String>,
    pub tool_output: Option<String>,
    pub prompt_sent: String,
    pub raw_response: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskDetail {
    pub task_id: String,
    pub kind: TaskKind,
    pub agent_id: String,
    pub skipped: bool,
    pub selected_tool: Option<String>,
    pub selection_prompts: Vec<String>,
    pub selection_outputs: Vec<String>,
    /// Shown to the agent, never written into the state.
    pub tool_output: Option<String>,
    pub prompt_sent: String,
    pub raw_response: String,
    pub route: Option<String>,
    pub score: Option<f64>,
    /// Accepted with a score below threshold after exhausting the retries.
    pub low_quality: bool,
    pub retries_used: u32,
    /// Earlier executions discarded by wrap-back, oldest first.
    pub attempts: Vec<Attempt>,
    pub backend_calls: usize,
}

impl TaskDetail {
    fn new(task: &TaskSpec) -> Self {
        Self {
            task_id: task.id.clone(),
            kind: task.kind,
            agent_id: task.agent_id.clone(),
            skipped: false,
            selected_tool: None,
            selection_prompts: Vec::new(),
            selection_outputs: Vec::new(),
            tool_output: None,
            prompt_sent: String::new(),
            raw_response: String::new(),
            route: None,
            score: None,
            low_quality: false,
            retries_used: 0,
            attempts: Vec::new(),
            backend_calls: 0,
        }
    }

    /// The text this task contributed to the state.
    pub fn appended(&self) -> &str {
        if self.skipped {
            SKIPPED
        } else {
            &self.raw_response
        }
    }

    fn as_attempt(&self) -> Attempt {
        Attempt {
            selected_tool: self.selected_tool.clone(),
            tool_output: self.tool_output.clone(),
            prompt_sent: self.prompt_sent.clone(),
            raw_response: self.raw_response.clone(),
            score: self.score,
        }
    }
}

/// The task sequence and state sequence of one run, with per-task detail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionRecord {
    pub task_sequence: Vec<String>,
    /// `states[0]` is the inquiry; `states[i]` follows `task_sequence[i-1]`.
    pub states: Vec<String>,
    pub details: Vec<TaskDetail>,
    pub memory_final: EntityMemory,
    /// What the final task appended; `None` if the run did not get there.
    pub final_output: Option<String>,
    pub backend_calls: usize,
    pub error: Option<String>,
}

impl ExecutionRecord {
    pub fn final_state(&self) -> &str {
        self.states.last().map_or("", String::as_str)
    }

    pub fn detail(&self, task_id: &str) -> Option<&TaskDetail> {
        self.details.iter().find(|d| d.task_id == task_id)
    }

    /// Tasks whose tool reported a failure.
    pub fn tool_errors(&self) -> impl Iterator<Item = &TaskDetail> {
        self.details.iter().filter(|d| {
            d.tool_output
                .as_deref()
                .is_some_and(|o| o.starts_with(TOOL_ERROR_PREFIX))
        })
    }
}

/// An aborted run together with everything recorded up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct ExecutionFailure {
    pub error: EngineError,
    pub partial: Box<ExecutionRecord>,
}

struct Run<'a> {
    spec: &'a WorkflowSpec,
    backends: &'a Backends,
    memory: EntityMemory,
    states: Vec<String>,
    details: Vec<TaskDetail>,
    /// Memory before the task at each position ran.
    snapshots: Vec<EntityMemory>,
    retries: BTreeMap<String, u32>,
    discarded: BTreeMap<String, Vec<Attempt>>,
    calls: usize,
}

impl Run<'_> {
    fn record(self, final_output: Option<String>, error: Option<&EngineError>) -> ExecutionRecord {
        ExecutionRecord {
            task_sequence: self.details.iter().map(|d| d.task_id.clone()).collect(),
            states: self.states,
            details: self.details,
            memory_final: self.memory,
            final_output,
            backend_calls: self.calls,
            error: error.map(ToString::to_string),
        }
    }

    fn fail(self, error: EngineError) -> ExecutionFailure {
        let partial = Box::new(self.record(None, Some(&error)));
        ExecutionFailure { error, partial }
    }

    fn run_task(&mut self, task: &TaskSpec, prev: &str) -> Result<TaskDetail, EngineError> {
        let mut d = TaskDetail::new(task);
        if task.guard.as_ref().is_some_and(|g| g.should_skip(prev)) {
            d.skipped = true;
            return Ok(d);
        }
        let agent = self
            .spec
            .agent(&task.agent_id)
            .expect("validated: agent resolves");
        let backend = self.backends.for_agent(&agent.id);
        let agent_error = |source: AgentError| EngineError::Agent {
            task: task.id.clone(),
            source,
        };

        if !task.tool_names.is_empty() {
            let candidates: Vec<&Tool> = task
                .tool_names
                .iter()
                .map(|n| self.spec.registry.get(n).expect("validated: tool resolves"))
                .collect();
            let selection = match select_tool(agent, backend, prev, &candidates) {
                Ok(s) => s,
                Err(e) => {
                    if let AgentError::ToolSelectionFailed { attempts, .. } = &e {
                        self.calls += attempts;
                    }
                    return Err(agent_error(e));
                }
            };
            self.calls += selection.backend_calls();
            d.backend_calls += selection.backend_calls();
            d.selected_tool = Some(selection.tool.name().to_string());
            d.tool_output = Some(selection.tool.invoke(prev, &mut self.memory));
            d.selection_prompts = selection.prompts;
            d.selection_outputs = selection.raw_outputs;
        }

        let routes = if task.kind == TaskKind::Router {
            self.spec.route_options(&task.id)
        } else {
            Vec::new()
        };
        let tool_output = d
            .selected_tool
            .as_deref()
            .zip(d.tool_output.as_deref())
            .map(|(tool, text)| ToolOutput { tool, text });
        d.prompt_sent = build_prompt(task, prev, tool_output, &routes);
        self.calls += 1;
        d.backend_calls += 1;
        d.raw_response = complete(agent, backend, &d.prompt_sent).map_err(agent_error)?;

        if task.kind == TaskKind::Router {
            let route = parse_route(&d.raw_response).map_err(|source| EngineError::Protocol {
                task: task.id.clone(),
                source,
            })?;
            if !routes.is_empty() && !routes.contains(&route) {
                return Err(EngineError::UnknownRoute {
                    task: task.id.clone(),
                    route,
                    options: routes,
                });
            }
            d.route = Some(route);
        }
        Ok(d)
    }
}

/// Execute `spec` on `inquiry`, one task at a time in linearized order.
///
/// Tool output goes into the task's prompt but only the agent's response is
/// appended to the state. An evaluator scoring below its threshold rewinds
/// the state and memory to just before its target task and runs again from
/// there, at most `max_retries` times.
pub fn execute(
    spec: &WorkflowSpec,
    inquiry: &str,
    backends: &Backends,
    memory: EntityMemory,
) -> Result<ExecutionRecord, ExecutionFailure> {
    let mut run = Run {
        spec,
        backends,
        memory,
        states: vec![inquiry.to_string()],
        details: Vec::new(),
        snapshots: Vec::new(),
        retries: BTreeMap::new(),
        discarded: BTreeMap::new(),
        calls: 0,
    };
    let order = match linearize(spec) {
        Ok(order) => order,
        Err(e) => return Err(run.fail(e)),
    };

    let mut i = 0;
    while i < order.len() {
        let task = spec.task(&order[i]).expect("linearized ids are declared");
        run.snapshots.truncate(i);
        run.snapshots.push(run.memory.clone());
        let prev = run.states[i].clone();
        log::info!("running task {} ({})", task.id, task.kind);

        let mut detail = match run.run_task(task, &prev) {
            Ok(d) => d,
            Err(e) => return Err(run.fail(e)),
        };
        detail.attempts = run.discarded.get(&task.id).cloned().unwrap_or_default();
        detail.retries_used = detail.attempts.len() as u32;

        if task.kind == TaskKind::Evaluator && !detail.skipped {
            let config = task
                .evaluator
                .as_ref()
                .expect("validated: evaluator config");
            let result = match parse_score(&detail.raw_response) {
                Ok(r) => r,
                Err(source) => {
                    return Err(run.fail(EngineError::Protocol {
                        task: task.id.clone(),
                        source,
                    }))
                }
            };
            detail.score = Some(result.score);
            let used = run.retries.get(&task.id).copied().unwrap_or(0);
            match apply_wrap_back(config, &result, used) {
                WrapBackDecision::Retry => {
                    let target = order
                        .iter()
                        .position(|t| *t == config.target_task_id)
                        .expect("validated: target precedes evaluator");
                    log::info!(
                        "task {} scored {} < {}; retrying from {} ({}/{})",
                        task.id,
                        result.score,
                        config.threshold,
                        config.target_task_id,
                        used + 1,
                        config.max_retries
                    );
                    run.retries.insert(task.id.clone(), used + 1);
                    for d in run.details[target..].iter().chain([&detail]) {
                        run.discarded
                            .entry(d.task_id.clone())
                            .or_default()
                            .push(d.as_attempt());
                    }
                    run.details.truncate(target);
                    run.states.truncate(target + 1);
                    run.memory = run.snapshots[target].clone();
                    i = target;
                    continue;
                }
                WrapBackDecision::Accept { low_quality } => {
                    detail.low_quality = low_quality;
                    detail.retries_used = used;
                }
            }
        }

        if !detail.skipped {
            if let Err(e) = run_callbacks(task, &detail.raw_response, &mut run.memory) {
                run.states
                    .push(append_state(&prev, &task.id, detail.appended()));
                run.details.push(detail);
                return Err(run.fail(e.into()));
            }
        }
        run.states
            .push(append_state(&prev, &task.id, detail.appended()));
        run.details.push(detail);
        i += 1;
    }

    let final_output = run.details.last().map(|d| d.appended().to_string());
    Ok(run.record(final_output, None))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::agents::{AgentProfile, ScriptRule, ScriptedBackend};
    use crate::engine::test_support::{fig2_spec, spec_with};
    use crate::engine::{EvaluatorConfig, MemoryValue};
    use crate::pm_tools::ToolRegistry;
    use crate::task_kinds::RouterGuard;

    fn scripted(rules: Vec<ScriptRule>) -> Backends {
        Backends::single(ScriptedBackend::new(rules, "fallback answer"))
    }

    #[test]
    fn single_plain_task() {
        let spec = spec_with(&["T"], &[], "T", "T");
        let rec = execute(
            &spec,
            "Q",
            &scripted(vec![ScriptRule::substring("Do T.", "A")]),
            EntityMemory::new(),
        )
        .unwrap();
        assert_eq!(rec.states, ["Q", "Q\n=== output of T ===\nA"]);
        assert_eq!(rec.task_sequence, ["T"]);
        assert_eq!(rec.final_output.as_deref(), Some("A"));
        assert_eq!(rec.backend_calls, 1);
    }

    #[test]
    fn fig2_sections_in_order() {
        let backends = scripted(vec![
            ScriptRule::substring("Do T1.", "optimized"),
            ScriptRule::substring("Do T2.", "dfg insights"),
            ScriptRule::substring("Do T3.", "variant insights"),
            ScriptRule::substring("Do T4.", "In conclusion"),
        ]);
        let rec = execute(
            &fig2_spec(),
            "Tell me the violations",
            &backends,
            EntityMemory::new(),
        )
        .unwrap();
        assert_eq!(rec.task_sequence, ["T1", "T2", "T3", "T4"]);
        let f = rec.final_state();
        let pos: Vec<usize> = [
            "optimized",
            "dfg insights",
            "variant insights",
            "In conclusion",
        ]
        .iter()
        .map(|s| f.find(s).unwrap())
        .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        for w in rec.states.windows(2) {
            assert!(w[1].starts_with(&w[0]) && w[1].len() > w[0].len());
        }
    }

    fn sentinel_spec() -> WorkflowSpec {
        let mut reg = ToolRegistry::new();
        reg.register(Tool::new("sentinel", "sentinel: emits a marker", |_, _| {
            Ok("XTOOLX".to_string())
        }))
        .unwrap();
        let mut spec = spec_with(&["T"], &[], "T", "T");
        spec.registry = Arc::new(reg);
        spec.tasks[0].tool_names = BTreeSet::from(["sentinel".to_string()]);
        spec
    }

    #[test]
    fn tool_output_not_persisted() {
        let rec = execute(
            &sentinel_spec(),
            "Q",
            &scripted(vec![]),
            EntityMemory::new(),
        )
        .unwrap();
        let d = &rec.details[0];
        assert_eq!(d.selected_tool.as_deref(), Some("sentinel"));
        assert_eq!(d.tool_output.as_deref(), Some("XTOOLX"));
        assert!(d.prompt_sent.contains("XTOOLX"));
        assert!(!rec.states[1].contains("XTOOLX"));
        assert_eq!(d.backend_calls, 1);
    }

    fn router_spec() -> WorkflowSpec {
        let mut spec = spec_with(
            &["T1", "T2", "T3", "T4"],
            &[("T1", "T2"), ("T1", "T3"), ("T2", "T4"), ("T3", "T4")],
            "T1",
            "T4",
        );
        spec.tasks[0].kind = TaskKind::Router;
        for (i, route) in [(1, "llm_insights"), (2, "code_gen")] {
            spec.tasks[i].guard = Some(RouterGuard {
                router_task_id: "T1".into(),
                expected_route_token: route.into(),
            });
        }
        spec
    }

    #[test]
    fn router_skips_other_branch() {
        for (route, run, skip) in [("llm_insights", "T2", "T3"), ("code_gen", "T3", "T2")] {
            let backends = scripted(vec![ScriptRule::substring(
                "Do T1.",
                format!("ok\nROUTE: {route}"),
            )]);
            let rec = execute(&router_spec(), "Q", &backends, EntityMemory::new()).unwrap();
            assert!(!rec.detail(run).unwrap().skipped);
            assert!(rec.detail(skip).unwrap().skipped);
            assert_eq!(
                super::super::last_section(rec.final_state(), skip),
                Some(SKIPPED)
            );
            assert_eq!(rec.detail("T1").unwrap().route.as_deref(), Some(route));
            assert_eq!(rec.backend_calls, 3);
        }
    }

    #[test]
    fn router_errors() {
        let backends = scripted(vec![ScriptRule::substring("Do T1.", "ROUTE: teleport")]);
        let err = execute(&router_spec(), "Q", &backends, EntityMemory::new()).unwrap_err();
        assert!(matches!(err.error, EngineError::UnknownRoute { .. }));
        assert_eq!(err.partial.states, ["Q"]);
        let backends = scripted(vec![]);
        let err = execute(&router_spec(), "Q", &backends, EntityMemory::new()).unwrap_err();
        assert!(matches!(err.error, EngineError::Protocol { .. }));
    }

    fn evaluator_spec(max_retries: u32) -> WorkflowSpec {
        let mut spec = spec_with(
            &["T1", "T2", "T3"],
            &[("T1", "T2"), ("T2", "T3")],
            "T1",
            "T3",
        );
        spec.tasks[1].kind = TaskKind::Evaluator;
        spec.tasks[1].evaluator = Some(EvaluatorConfig {
            threshold: 5.0,
            max_retries,
            target_task_id: "T1".into(),
        });
        spec
    }

    fn evaluator_backends(scores: &[&str]) -> Backends {
        scripted(vec![
            ScriptRule::sequence("Do T1.", ["insight v1", "insight v2", "insight v3"]),
            ScriptRule::sequence(
                "Do T2.",
                scores.iter().map(|s| format!("grading\nSCORE: {s}")),
            ),
        ])
    }

    #[test]
    fn one_retry_then_accept() {
        let rec = execute(
            &evaluator_spec(2),
            "Q",
            &evaluator_backends(&["3.0", "8.0"]),
            EntityMemory::new(),
        )
        .unwrap();
        let ev = rec.detail("T2").unwrap();
        assert_eq!(
            (ev.score, ev.retries_used, ev.low_quality),
            (Some(8.0), 1, false)
        );
        assert_eq!(ev.attempts.len(), 1);
        assert_eq!(ev.attempts[0].score, Some(3.0));
        let target = rec.detail("T1").unwrap();
        assert_eq!(target.raw_response, "insight v2");
        assert_eq!(target.retries_used, 1);
        assert!(!rec.final_state().contains("insight v1"));
        assert_eq!(rec.task_sequence, ["T1", "T2", "T3"]);
        assert_eq!(rec.backend_calls, 5);
    }

    #[test]
    fn exhausted_retries_flag_low_quality() {
        let rec = execute(
            &evaluator_spec(2),
            "Q",
            &evaluator_backends(&["3.0", "3.0", "3.0"]),
            EntityMemory::new(),
        )
        .unwrap();
        let ev = rec.detail("T2").unwrap();
        assert_eq!(
            (ev.score, ev.retries_used, ev.low_quality),
            (Some(3.0), 2, true)
        );
        assert_eq!(rec.detail("T1").unwrap().attempts.len(), 2);
        assert_eq!(rec.backend_calls, 7);
    }

    #[test]
    fn wrap_back_restores_memory() {
        let mut spec = evaluator_spec(1);
        spec.tasks[0].callback_names = vec!["store_output:insight".into()];
        let rec = execute(
            &spec,
            "Q",
            &evaluator_backends(&["2.0", "9.0"]),
            EntityMemory::new(),
        )
        .unwrap();
        assert_eq!(
            rec.memory_final.load("insight").unwrap(),
            &MemoryValue::Text("insight v2".into())
        );
    }

    #[test]
    fn agent_failure_keeps_partial_record() {
        let mut spec = fig2_spec();
        spec.agents.push(AgentProfile::new("b", "You are terse."));
        spec.tasks[2].agent_id = "b".into();
        let backends = scripted(vec![]).with_agent("b", Arc::new(ScriptedBackend::new(vec![], "")));
        let err = execute(&spec, "Q", &backends, EntityMemory::new()).unwrap_err();
        assert!(matches!(
            &err.error,
            EngineError::Agent { task, source: AgentError::BackendEmptyResponse } if task == "T3"
        ));
        assert_eq!(err.partial.task_sequence, ["T1", "T2"]);
        assert_eq!(err.partial.states.len(), 3);
        assert!(err.partial.error.is_some());
    }

    #[test]
    fn callback_failure_aborts() {
        let mut spec = fig2_spec();
        spec.tasks[1].callback_names = vec!["require_contains:violation".into()];
        let err = execute(&spec, "Q", &scripted(vec![]), EntityMemory::new()).unwrap_err();
        assert!(matches!(err.error, EngineError::Callback(_)));
        assert_eq!(err.partial.task_sequence, ["T1", "T2"]);
    }

    #[test]
    fn invalid_spec_is_rejected_before_running() {
        let spec = spec_with(&["T1", "T2"], &[("T1", "T2"), ("T2", "T1")], "T1", "T2");
        let err = execute(&spec, "Q", &scripted(vec![]), EntityMemory::new()).unwrap_err();
        assert!(matches!(err.error, EngineError::InvalidWorkflow(_)));
        assert_eq!(err.partial.states, ["Q"]);
        assert_eq!(err.partial.backend_calls, 0);
    }
}
