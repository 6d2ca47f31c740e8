use std::path::PathBuf;

use thiserror::Error;

use super::memory::EntityMemory;
use super::spec::TaskSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CallbackError {
    #[error("callback check '{callback}' failed for task '{task}': {reason}")]
    CallbackCheckFailed {
        task: String,
        callback: String,
        reason: String,
    },
    #[error("task '{task}' declares unknown callback '{callback}'")]
    UnknownCallback { task: String, callback: String },
}

/// A built-in callback, run after a task produced its response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Callback {
    /// `write_to_file:<path>`: persist the response verbatim.
    WriteToFile(PathBuf),
    /// `require_nonempty`
    RequireNonempty,
    /// `require_contains:<needle>`
    RequireContains(String),
    /// `store_output:<key>`: keep the response in entity memory as text.
    StoreOutput(String),
}

impl Callback {
    pub fn parse(name: &str) -> Option<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (name.trim(), None),
        };
        match (head, arg) {
            ("require_nonempty", None) => Some(Callback::RequireNonempty),
            ("write_to_file", Some(p)) if !p.trim().is_empty() => {
                Some(Callback::WriteToFile(PathBuf::from(p.trim())))
            }
            ("require_contains", Some(n)) if !n.is_empty() => {
                Some(Callback::RequireContains(n.to_string()))
            }
            ("store_output", Some(k)) if !k.trim().is_empty() => Some(Callback::StoreOutput(
                k.trim().trim_start_matches('@').to_string(),
            )),
            _ => None,
        }
    }
}

/// Run the task's callbacks in declared order; the first failure stops the
/// sequence.
pub fn run_callbacks(
    task: &TaskSpec,
    response: &str,
    memory: &mut EntityMemory,
) -> Result<(), CallbackError> {
    for name in &task.callback_names {
        let failed = |reason: String| CallbackError::CallbackCheckFailed {
            task: task.id.clone(),
            callback: name.clone(),
            reason,
        };
        let callback = Callback::parse(name).ok_or_else(|| CallbackError::UnknownCallback {
            task: task.id.clone(),
            callback: name.clone(),
        })?;
        match callback {
            Callback::RequireNonempty => {
                if response.trim().is_empty() {
                    return Err(failed("response is empty".into()));
                }
            }
            Callback::RequireContains(needle) => {
                if !response.contains(&needle) {
                    return Err(failed(format!("response does not contain {needle:?}")));
                }
            }
            Callback::WriteToFile(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| failed(e.to_string()))?;
                }
                std::fs::write(&path, response)
                    .map_err(|e| failed(format!("cannot write {}: {e}", path.display())))?;
            }
            Callback::StoreOutput(key) => {
                memory
                    .store(key, response)
                    .map_err(|e| failed(e.to_string()))?;
            }
        }
    }
    Ok(())
}
