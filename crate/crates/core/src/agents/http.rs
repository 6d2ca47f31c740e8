use std::time::Duration;

use serde_json::{json, Value};

use super::{AgentError, CompletionBackend, CompletionRequest, RetryPolicy};

pub const ENV_ENDPOINT: &str = "AGWF_ENDPOINT";
pub const ENV_API_KEY: &str = "AGWF_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpDefaults {
    /// Used when a profile leaves `model_ref` empty.
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl Default for HttpDefaults {
    fn default() -> Self {
        let policy = RetryPolicy::default();
        Self {
            model: "gpt-4o-mini".into(),
            timeout: policy.timeout,
            max_retries: policy.max_retries,
        }
    }
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpChatBackend {
    endpoint: String,
    api_key: String,
    defaults: HttpDefaults,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpChatBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatBackend")
            .field("endpoint", &self.endpoint)
            .field("defaults", &self.defaults)
            .finish_non_exhaustive()
    }
}

pub fn http_chat_backend(
    endpoint_url: impl Into<String>,
    api_key: impl Into<String>,
    defaults: HttpDefaults,
) -> HttpChatBackend {
    let agent = ureq::AgentBuilder::new().timeout(defaults.timeout).build();
    HttpChatBackend {
        endpoint: endpoint_url.into(),
        api_key: api_key.into(),
        defaults,
        agent,
    }
}

impl HttpChatBackend {
    /// Build from `AGWF_ENDPOINT` and `AGWF_API_KEY`; `None` when the endpoint
    /// is unset. A missing key is sent as an empty bearer token.
    pub fn from_env(defaults: HttpDefaults) -> Option<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok().filter(|e| !e.is_empty())?;
        let key = std::env::var(ENV_API_KEY).unwrap_or_default();
        Some(http_chat_backend(endpoint, key, defaults))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn body(&self, request: &CompletionRequest<'_>) -> Value {
        let model = if request.model_ref.is_empty() {
            self.defaults.model.as_str()
        } else {
            request.model_ref
        };
        json!({
            "model": model,
            "messages": [
                {"role": "system", "content": request.role_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
        })
    }
}

fn extract_content(body: &Value) -> Result<String, AgentError> {
    body.get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| AgentError::MalformedResponse("missing choices[0].message.content".into()))
}

impl CompletionBackend for HttpChatBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, AgentError> {
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_string(&self.body(request).to_string());
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let message = r.into_string().unwrap_or_default();
                return Err(AgentError::TransportError {
                    status: Some(status),
                    message,
                });
            }
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                if message.contains("timed out") {
                    return Err(AgentError::BackendTimeout(self.defaults.timeout));
                }
                return Err(AgentError::TransportError {
                    status: None,
                    message,
                });
            }
        };
        let text = response
            .into_string()
            .map_err(|e| AgentError::TransportError {
                status: None,
                message: e.to_string(),
            })?;
        let body: Value = serde_json::from_str(&text)
            .map_err(|e| AgentError::MalformedResponse(format!("invalid JSON: {e}")))?;
        extract_content(&body)
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.defaults.max_retries,
            timeout: self.defaults.timeout,
        }
    }
}
