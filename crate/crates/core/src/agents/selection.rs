use std::fmt::Write;

use super::{complete, AgentError, AgentProfile, CompletionBackend};
use crate::pm_tools::Tool;

/// Outcome of a tool selection, including the exchange that produced it.
#[derive(Debug, Clone)]
pub struct Selection<'t> {
    pub tool: &'t Tool,
    pub prompts: Vec<String>,
    pub raw_outputs: Vec<String>,
}

impl Selection<'_> {
    pub fn backend_calls(&self) -> usize {
        self.raw_outputs.len()
    }
}

pub fn build_selection_prompt(state: &str, candidates: &[&Tool]) -> String {
    let mut prompt = String::from(
        "You must select exactly one tool to process the current workflow state.\n\nAvailable tools:\n",
    );
    for tool in candidates {
        let _ = writeln!(prompt, "- {}: {}", tool.name(), tool.documentation());
    }
    let _ = write!(
        prompt,
        "\nCurrent workflow state:\n{state}\n\n\
         Answer with the name of exactly one tool from the list above. \
         The last line of your answer must contain only the tool name."
    );
    prompt
}

/// The tool named on the last non-empty line, if it is a candidate.
pub fn parse_tool_name<'t>(response: &str, candidates: &[&'t Tool]) -> Option<&'t Tool> {
    let last = response
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())?;
    candidates.iter().copied().find(|t| t.name() == last)
}

/// Let the agent pick one of `candidates` for the current state.
///
/// A single candidate is returned without consulting the backend. Otherwise
/// the agent is asked once, and re-asked once if its answer does not name a
/// candidate.
pub fn select_tool<'t>(
    profile: &AgentProfile,
    backend: &dyn CompletionBackend,
    state: &str,
    candidates: &[&'t Tool],
) -> Result<Selection<'t>, AgentError> {
    match candidates {
        [] => return Err(AgentError::NoCandidates),
        [only] => {
            return Ok(Selection {
                tool: only,
                prompts: vec![],
                raw_outputs: vec![],
            })
        }
        _ => {}
    }
    let first = build_selection_prompt(state, candidates);
    let mut prompts = Vec::with_capacity(2);
    let mut raw_outputs = Vec::with_capacity(2);
    let mut prompt = first.clone();
    for attempt in 0..2 {
        let answer = complete(profile, backend, &prompt)?;
        prompts.push(prompt.clone());
        raw_outputs.push(answer.clone());
        if let Some(tool) = parse_tool_name(&answer, candidates) {
            return Ok(Selection {
                tool,
                prompts,
                raw_outputs,
            });
        }
        if attempt == 0 {
            let names: Vec<&str> = candidates.iter().map(|t| t.name()).collect();
            prompt = format!(
                "{first}\n\nYour previous answer did not end with the name of an available tool. \
                 Reply with one of: {}",
                names.join(", ")
            );
        }
    }
    Err(AgentError::ToolSelectionFailed {
        attempts: raw_outputs.len(),
        raw_output: raw_outputs.pop().unwrap_or_default(),
    })
}
