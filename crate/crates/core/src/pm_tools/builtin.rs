use super::reference::load_log;
use super::{
    abstract_dfg, abstract_variants, directive, render_comparison, resolve_log_reference, Tool,
    ToolError, ToolRegistry,
};
use crate::engine::EntityMemory;
use crate::event_log::{
    compare_dfgs, discover_dfg, discover_variants, parse_predicate, split_log,
    DEFAULT_SHIFT_THRESHOLD,
};

pub const DEFAULT_DFG_TOP_K: usize = 25;
pub const DEFAULT_VARIANTS_TOP_K: usize = 15;
pub const DEFAULT_FINDINGS_LIMIT: usize = 25;

const DFG_DOC: &str = "dfg_discovery: computes the directly-follows graph of the event log \
referenced in the input (the last `@key` entity reference or `.xes`/`.csv` path). Optional \
directive line `top_k: <n>` (default 25). Returns a header `DFG (top <k> edges of <n>):`, one line \
per edge `<a> -> <b> (freq=<f>, avg_dur=<s>s)` sorted by frequency, then `start:` and `end:` \
activity counts. Best for questions about transitions, handovers and performance between two \
activities.";

const VARIANTS_DOC: &str = "variants_discovery: computes the process variants (distinct activity \
sequences) of the event log referenced in the input (the last `@key` entity reference or \
`.xes`/`.csv` path). Optional directive line `top_k: <n>` (default 15). Returns a header \
`Variants (top <k> of <n>):` and one line per variant `<a>,<b>,<c> (count=<m>)`, most frequent \
first. Best for whole-case behavior such as repeated or missing steps.";

const SPLIT_DOC: &str = "split_log_by_predicate: divides the event log referenced in the input \
into the cases satisfying a case-attribute predicate (the protected group) and the remaining \
cases. Requires a directive line `predicate: <expr>` such as `predicate: gender = \"F\" and age < \
30` (operators = != < <= > >=, literals quoted text, numbers, true/false). Optional directive \
`store_as: <k1>,<k2>` (default `protected,non_protected`) names the entity-memory keys for the two \
sub-logs. Returns `protected=<n> cases, non-protected=<m> cases` and the stored keys.";

const COMPARE_DOC: &str = "compare_group_dfgs: compares the directly-follows graphs of two event \
logs stored in entity memory. Requires a directive line `groups: @k1,@k2` (group A, group B). \
Optional directives `shift_threshold: <0..1>` (default 0.05) and `top_k: <n>` (default 25). \
Returns one line per behavioral difference: edges only present in one group, relative frequency \
shifts, and mean duration shifts.";

fn top_k(state: &str, default: usize) -> Result<usize, ToolError> {
    match directive(state, "top_k") {
        None => Ok(default),
        Some(raw) => match raw.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k),
            _ => Err(ToolError::InvalidDirective {
                directive: "top_k",
                message: format!("expected a positive integer, got '{raw}'"),
            }),
        },
    }
}

fn entity_key(raw: &str, directive_name: &'static str) -> Result<String, ToolError> {
    let key = raw.trim().trim_start_matches('@');
    let valid = key
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if valid {
        Ok(key.to_string())
    } else {
        Err(ToolError::InvalidDirective {
            directive: directive_name,
            message: format!("'{raw}' is not a valid entity key"),
        })
    }
}

fn key_pair(raw: &str, directive_name: &'static str) -> Result<(String, String), ToolError> {
    let parts: Vec<&str> = raw.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(ToolError::InvalidDirective {
            directive: directive_name,
            message: format!("expected two comma-separated keys, got '{raw}'"),
        });
    };
    let (a, b) = (
        entity_key(a, directive_name)?,
        entity_key(b, directive_name)?,
    );
    if a == b {
        return Err(ToolError::InvalidDirective {
            directive: directive_name,
            message: "the two keys must differ".into(),
        });
    }
    Ok((a, b))
}

fn dfg_discovery(state: &str, memory: &mut EntityMemory) -> Result<String, ToolError> {
    let k = top_k(state, DEFAULT_DFG_TOP_K)?;
    let log = resolve_log_reference(state, memory)?;
    Ok(abstract_dfg(&discover_dfg(&log), k))
}

fn variants_discovery(state: &str, memory: &mut EntityMemory) -> Result<String, ToolError> {
    let k = top_k(state, DEFAULT_VARIANTS_TOP_K)?;
    let log = resolve_log_reference(state, memory)?;
    Ok(abstract_variants(&discover_variants(&log), k))
}

fn split_log_by_predicate(state: &str, memory: &mut EntityMemory) -> Result<String, ToolError> {
    let expr = directive(state, "predicate").ok_or(ToolError::MissingDirective("predicate"))?;
    let predicate = parse_predicate(expr)?;
    let (protected_key, rest_key) = key_pair(
        directive(state, "store_as").unwrap_or("protected,non_protected"),
        "store_as",
    )?;
    let log = resolve_log_reference(state, memory)?;
    for key in [&protected_key, &rest_key] {
        if memory.contains(key) {
            return Err(crate::engine::MemoryError::DuplicateKey(key.clone()).into());
        }
    }
    let (protected, rest) = split_log(&log, &predicate);
    let summary = format!(
        "protected={} cases, non-protected={} cases (predicate: {predicate}; stored as @{protected_key}, @{rest_key})",
        protected.traces.len(),
        rest.traces.len()
    );
    memory.store(protected_key, protected)?;
    memory.store(rest_key, rest)?;
    Ok(summary)
}

fn compare_group_dfgs(state: &str, memory: &mut EntityMemory) -> Result<String, ToolError> {
    let groups = directive(state, "groups").ok_or(ToolError::MissingDirective("groups"))?;
    let (key_a, key_b) = key_pair(groups, "groups")?;
    let threshold = match directive(state, "shift_threshold") {
        None => DEFAULT_SHIFT_THRESHOLD,
        Some(raw) => match raw.parse::<f64>() {
            Ok(t) if (0.0..=1.0).contains(&t) => t,
            _ => {
                return Err(ToolError::InvalidDirective {
                    directive: "shift_threshold",
                    message: format!("expected a number in [0, 1], got '{raw}'"),
                })
            }
        },
    };
    let limit = top_k(state, DEFAULT_FINDINGS_LIMIT)?;
    let log_a = load_log(memory, &key_a)?;
    let log_b = load_log(memory, &key_b)?;
    let cmp = compare_dfgs(&discover_dfg(&log_a), &discover_dfg(&log_b), threshold);
    Ok(format!(
        "group A = @{key_a} ({} cases), group B = @{key_b} ({} cases)\n{}",
        log_a.traces.len(),
        log_b.traces.len(),
        render_comparison(&cmp, limit)
    ))
}

/// The process-mining tool suite: `dfg_discovery`, `variants_discovery`,
/// `split_log_by_predicate` and `compare_group_dfgs`.
pub fn builtin_registry() -> ToolRegistry {
    let mut registry = ToolRegistry::new();
    let tools = [
        Tool::new("dfg_discovery", DFG_DOC, dfg_discovery),
        Tool::new("variants_discovery", VARIANTS_DOC, variants_discovery),
        Tool::new("split_log_by_predicate", SPLIT_DOC, split_log_by_predicate),
        Tool::new("compare_group_dfgs", COMPARE_DOC, compare_group_dfgs),
    ];
    for tool in tools {
        registry
            .register(tool)
            .expect("builtin tool names are unique");
    }
    registry
}
