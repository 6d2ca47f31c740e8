use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use super::{AgentError, CompletionBackend, CompletionRequest};

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read rules file '{path}': {message}")]
    Io { path: String, message: String },
    #[error("invalid rules document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid pattern in rule {index}: {message}")]
    Pattern { index: usize, message: String },
    #[error(
        "rule {0} needs exactly one of `match` / `pattern` and one of `response` / `responses`"
    )]
    Shape(usize),
}

#[derive(Debug, Clone)]
pub enum Matcher {
    Substring(String),
    /// Must match the whole user prompt.
    Pattern(Regex),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Substring(s) => prompt.contains(s.as_str()),
            Matcher::Pattern(re) => re.is_match(prompt),
        }
    }

    pub fn pattern(pattern: &str) -> Result<Self, regex::Error> {
        Regex::new(&format!("^(?:{pattern})$")).map(Matcher::Pattern)
    }
}

/// A scripted rule. When a rule matches repeatedly it walks through its
/// responses in order and then keeps repeating the last one.
#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub matcher: Matcher,
    pub responses: Vec<String>,
}

impl ScriptRule {
    pub fn substring(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::Substring(needle.into()),
            responses: vec![response.into()],
        }
    }

    pub fn sequence<I, S>(needle: impl Into<String>, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            matcher: Matcher::Substring(needle.into()),
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedCall {
    pub role_prompt: String,
    pub user_prompt: String,
    pub response: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    #[serde(rename = "match")]
    substring: Option<String>,
    pattern: Option<String>,
    response: Option<String>,
    responses: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RulesDoc {
    Full {
        rules: Vec<RuleDoc>,
        #[serde(default)]
        fallback: String,
    },
    Bare(Vec<RuleDoc>),
}

/// Deterministic backend: the first rule whose matcher accepts the user
/// prompt answers; otherwise the fallback does.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    fallback: String,
    cursors: Mutex<Vec<usize>>,
    calls: Mutex<Vec<ScriptedCall>>,
}

impl Clone for ScriptedBackend {
    /// A clone starts from a fresh script: cursors and the call log are reset.
    fn clone(&self) -> Self {
        Self::new(self.rules.clone(), self.fallback.clone())
    }
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>, fallback: impl Into<String>) -> Self {
        let cursors = Mutex::new(vec![0; rules.len()]);
        Self {
            rules,
            fallback: fallback.into(),
            cursors,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Parse a rules document: `{"rules": [{"match": ..., "response": ...}], "fallback": ...}`
    /// or a bare array of rules. A rule may use `pattern` (a regex that must
    /// match the whole prompt) instead of `match`, and `responses` (a list)
    /// instead of `response`.
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let (docs, fallback) = match serde_json::from_str::<RulesDoc>(text)? {
            RulesDoc::Full { rules, fallback } => (rules, fallback),
            RulesDoc::Bare(rules) => (rules, String::new()),
        };
        let rules = docs
            .into_iter()
            .enumerate()
            .map(|(index, doc)| {
                let matcher = match (doc.substring, doc.pattern) {
                    (Some(s), None) => Matcher::Substring(s),
                    (None, Some(p)) => Matcher::pattern(&p).map_err(|e| ScriptError::Pattern {
                        index,
                        message: e.to_string(),
                    })?,
                    _ => return Err(ScriptError::Shape(index)),
                };
                let responses = match (doc.response, doc.responses) {
                    (Some(r), None) => vec![r],
                    (None, Some(rs)) if !rs.is_empty() => rs,
                    _ => return Err(ScriptError::Shape(index)),
                };
                Ok(ScriptRule { matcher, responses })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::new(rules, fallback))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScriptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("call log poisoned").len()
    }

    pub fn calls(&self) -> Vec<ScriptedCall> {
        self.calls.lock().expect("call log poisoned").clone()
    }

    fn respond(&self, prompt: &str) -> String {
        let mut cursors = self.cursors.lock().expect("cursor lock poisoned");
        match self.rules.iter().position(|r| r.matcher.matches(prompt)) {
            Some(i) => {
                let rule = &self.rules[i];
                let at = cursors[i].min(rule.responses.len() - 1);
                cursors[i] += 1;
                rule.responses[at].clone()
            }
            None => self.fallback.clone(),
        }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, AgentError> {
        let response = self.respond(request.user_prompt);
        self.calls
            .lock()
            .expect("call log poisoned")
            .push(ScriptedCall {
                role_prompt: request.role_prompt.to_string(),
                user_prompt: request.user_prompt.to_string(),
                response: response.clone(),
            });
        Ok(response)
    }
}
