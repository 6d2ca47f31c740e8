//! Task kinds as prompt-construction and output-parsing strategies.
//!
//! Routers end their answer with `ROUTE: <token>`; guarded successor tasks
//! run only when the token matches their expected route. Evaluators end
//! with `SCORE: <1.0-10.0>`; a low score can send the execution back to the
//! evaluated task for a bounded number of retries.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{last_section, EvaluatorConfig, TaskSpec};

pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Plain,
    PromptOptimizer,
    Ensemble,
    Router,
    Evaluator,
    Improver,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Plain => "plain",
            TaskKind::PromptOptimizer => "prompt_optimizer",
            TaskKind::Ensemble => "ensemble",
            TaskKind::Router => "router",
            TaskKind::Evaluator => "evaluator",
            TaskKind::Improver => "improver",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskKindError {
    #[error("router answer has no `ROUTE: <token>` line")]
    RouteMissing,
    #[error("evaluator answer has no parsable `SCORE: <number>` line")]
    ScoreMissing,
    #[error("score {0} is outside [1.0, 10.0]")]
    ScoreOutOfRange(f64),
}

/// Run the guarded task only if `router_task_id` chose `expected_route_token`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouterGuard {
    #[serde(rename = "router")]
    pub router_task_id: String,
    #[serde(rename = "route")]
    pub expected_route_token: String,
}

impl RouterGuard {
    /// Evaluated against the router's section of the state. A router that was
    /// itself skipped (no route line) skips all of its guarded tasks.
    pub fn should_skip(&self, state: &str) -> bool {
        match last_section(state, &self.router_task_id).map(parse_route) {
            Some(Ok(token)) => token != self.expected_route_token,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatorResult {
    pub score: f64,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapBackDecision {
    Accept { low_quality: bool },
    Retry,
}

/// The tool output the task prompt is built on.
#[derive(Debug, Clone, Copy)]
pub struct ToolOutput<'a> {
    pub tool: &'a str,
    pub text: &'a str,
}

fn framing(task: &TaskSpec) -> Option<String> {
    match task.kind {
        TaskKind::Plain => None,
        TaskKind::PromptOptimizer => Some(
            "Rewrite the user's inquiry above into a clear and precise request, tailored to the \
             capabilities of the analysis agents that will answer it."
                .into(),
        ),
        TaskKind::Ensemble => Some(
            "The text above collates insights produced by previous tasks from different \
             perspectives. Merge them into one coherent answer containing the main results."
                .into(),
        ),
        TaskKind::Router => {
            Some("Decide which one of the downstream routes should handle the inquiry above.".into())
        }
        TaskKind::Evaluator => Some(format!(
            "Evaluate the quality of the output of task {} above.",
            task.evaluator
                .as_ref()
                .map_or("<unknown>", |e| e.target_task_id.as_str())
        )),
        TaskKind::Improver => Some(
            "Improve the quality of the previous output above (second opinion): refine it, correct \
             mistakes, and keep it self-contained."
                .into(),
        ),
    }
}

/// Build the user prompt of a task: the state, the tool output section (if
/// any), the kind framing, the instruction and the expected output, plus the
/// ROUTE/SCORE protocol line for routers and evaluators.
pub fn build_prompt(
    task: &TaskSpec,
    state: &str,
    tool_output: Option<ToolOutput<'_>>,
    route_options: &[String],
) -> String {
    let mut prompt = match tool_output {
        Some(out) => crate::engine::append_state(state, &format!("tool {}", out.tool), out.text),
        None => state.to_string(),
    };
    prompt.push_str("\n\n");
    if let Some(framing) = framing(task) {
        prompt.push_str(&framing);
        prompt.push('\n');
    }
    prompt.push_str(&format!(
        "Task: {}\nExpected output: {}",
        task.instruction, task.expected_output
    ));
    match task.kind {
        TaskKind::Router => prompt.push_str(&format!(
            "\nChoose exactly one of the routes: {}.\nEnd your answer with a final line `ROUTE: <option>`.",
            route_options.join(", ")
        )),
        TaskKind::Evaluator => prompt.push_str(
            "\nGrade it from 1.0 (worst) to 10.0 (best).\nEnd your answer with a final line `SCORE: <1.0-10.0>`.",
        ),
        _ => {}
    }
    prompt
}

fn last_tagged_line<'a>(response: &'a str, tag: &str) -> Option<&'a str> {
    response
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix(tag).map(str::trim))
}

/// Token of the last `ROUTE: <token>` line.
pub fn parse_route(response: &str) -> Result<String, TaskKindError> {
    last_tagged_line(response, "ROUTE:")
        .map(|t| {
            t.trim_matches(|c| matches!(c, '`' | '"' | '\'' | '*'))
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .ok_or(TaskKindError::RouteMissing)
}

/// Score from the last `SCORE:` line; the rest of the answer is the rationale.
pub fn parse_score(response: &str) -> Result<EvaluatorResult, TaskKindError> {
    let lines: Vec<&str> = response.lines().collect();
    let idx = lines
        .iter()
        .rposition(|l| l.trim().starts_with("SCORE:"))
        .ok_or(TaskKindError::ScoreMissing)?;
    let raw = lines[idx].trim().trim_start_matches("SCORE:").trim();
    let score: f64 = raw.parse().map_err(|_| TaskKindError::ScoreMissing)?;
    if !(MIN_SCORE..=MAX_SCORE).contains(&score) {
        return Err(TaskKindError::ScoreOutOfRange(score));
    }
    let rationale = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, l)| *l)
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string();
    Ok(EvaluatorResult { score, rationale })
}

/// Retry while the score is below threshold and retries remain; a low score
/// after exhaustion is accepted and flagged.
pub fn apply_wrap_back(
    config: &EvaluatorConfig,
    result: &EvaluatorResult,
    retries_used: u32,
) -> WrapBackDecision {
    let low = result.score < config.threshold;
    if low && retries_used < config.max_retries {
        WrapBackDecision::Retry
    } else {
        WrapBackDecision::Accept { low_quality: low }
    }
}
