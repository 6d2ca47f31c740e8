//! Agents: an LLM behind a role prompt, reached through a
//! [`CompletionBackend`].
//!
//! Two backends ship with the crate. [`ScriptedBackend`] answers from an
//! ordered rule list and makes every workflow run reproducible;
//! [`HttpChatBackend`] talks to an OpenAI-compatible chat-completions
//! endpoint.

mod http;
mod scripted;
mod selection;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::http::{http_chat_backend, HttpChatBackend, HttpDefaults, ENV_API_KEY, ENV_ENDPOINT};
pub use self::scripted::{Matcher, ScriptError, ScriptRule, ScriptedBackend, ScriptedCall};
pub use self::selection::{build_selection_prompt, parse_tool_name, select_tool, Selection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("refusing to send an empty prompt")]
    EmptyPrompt,
    #[error("backend did not answer within {0:?}")]
    BackendTimeout(Duration),
    #[error("backend returned an empty response")]
    BackendEmptyResponse,
    #[error("transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    TransportError {
        status: Option<u16>,
        message: String,
    },
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
    #[error("tool selection failed after {attempts} attempts; last answer: {raw_output:?}")]
    ToolSelectionFailed { attempts: usize, raw_output: String },
    #[error("tool selection needs at least one candidate")]
    NoCandidates,
}

impl AgentError {
    /// Errors worth retrying: the request may succeed when sent again.
    pub fn is_transient(&self) -> bool {
        match self {
            AgentError::TransportError { status, .. } => {
                status.map_or(true, |s| s == 429 || s >= 500)
            }
            AgentError::BackendTimeout(_) => true,
            _ => false,
        }
    }
}

/// An LLM bound to a role. The role prompt is sent as the system message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    pub id: String,
    pub role_prompt: String,
    #[serde(default)]
    pub model_ref: String,
    #[serde(default)]
    pub temperature: f64,
}

impl AgentProfile {
    pub fn new(id: impl Into<String>, role_prompt: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            role_prompt: role_prompt.into(),
            model_ref: String::new(),
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub role_prompt: &'a str,
    pub user_prompt: &'a str,
    pub model_ref: &'a str,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one on transient failures.
    pub max_retries: u32,
    /// Per-attempt wall-clock budget, enforced by the backend.
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            timeout: Duration::from_secs(120),
        }
    }
}

/// A (possibly nondeterministic) text completion service.
///
/// Implementations must be shareable across threads; each call is
/// independent and blocking.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, AgentError>;

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::default()
    }
}

/// Ask `backend` to answer `user_prompt` in the role of `profile`.
///
/// Transient failures are retried up to the backend's retry budget; an empty
/// answer is an error, never a silent success.
pub fn complete(
    profile: &AgentProfile,
    backend: &dyn CompletionBackend,
    user_prompt: &str,
) -> Result<String, AgentError> {
    if user_prompt.trim().is_empty() {
        return Err(AgentError::EmptyPrompt);
    }
    let request = CompletionRequest {
        role_prompt: &profile.role_prompt,
        user_prompt,
        model_ref: &profile.model_ref,
        temperature: profile.temperature,
    };
    let policy = backend.retry_policy();
    let mut attempt = 0;
    loop {
        match backend.complete(&request) {
            Ok(text) if text.trim().is_empty() => return Err(AgentError::BackendEmptyResponse),
            Ok(text) => return Ok(text),
            Err(e) if e.is_transient() && attempt < policy.max_retries => {
                attempt += 1;
                log::warn!(
                    "agent '{}': {e}; retry {attempt}/{}",
                    profile.id,
                    policy.max_retries
                );
            }
            Err(e) => return Err(e),
        }
    }
}
