use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::callbacks::Callback;
use super::spec::WorkflowSpec;
use crate::task_kinds::{TaskKind, MAX_SCORE, MIN_SCORE};

/// A broken structural rule of a workflow.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "PascalCase")]
pub enum Violation {
    DuplicateTaskId {
        task: String,
    },
    DuplicateAgentId {
        agent: String,
    },
    EmptyRolePrompt {
        agent: String,
    },
    UnknownAgent {
        task: String,
        agent: String,
    },
    UnknownTool {
        task: String,
        tool: String,
    },
    UnknownCallback {
        task: String,
        callback: String,
    },
    UnknownPredecessor {
        task: String,
        predecessor: String,
    },
    UnknownPrecTask {
        task: String,
    },
    UnknownInitialTask {
        task: String,
    },
    UnknownFinalTask {
        task: String,
    },
    CycleDetected {
        tasks: Vec<String>,
    },
    InitialTaskHasPredecessors {
        task: String,
        predecessors: Vec<String>,
    },
    NotReachableFromInitial {
        task: String,
    },
    FinalTaskNotSuccessor {
        task: String,
    },
    EvaluatorConfigMismatch {
        task: String,
    },
    InvalidThreshold {
        task: String,
        threshold: f64,
    },
    InvalidEvaluatorTarget {
        task: String,
        target: String,
    },
    InvalidGuard {
        task: String,
        router: String,
        reason: String,
    },
}

impl Violation {
    /// The violated rule, e.g. `CycleDetected`.
    pub fn class(&self) -> &'static str {
        match self {
            Violation::DuplicateTaskId { .. } => "DuplicateTaskId",
            Violation::DuplicateAgentId { .. } => "DuplicateAgentId",
            Violation::EmptyRolePrompt { .. } => "EmptyRolePrompt",
            Violation::UnknownAgent { .. } => "UnknownAgent",
            Violation::UnknownTool { .. } => "UnknownTool",
            Violation::UnknownCallback { .. } => "UnknownCallback",
            Violation::UnknownPredecessor { .. } => "UnknownPredecessor",
            Violation::UnknownPrecTask { .. } => "UnknownPrecTask",
            Violation::UnknownInitialTask { .. } => "UnknownInitialTask",
            Violation::UnknownFinalTask { .. } => "UnknownFinalTask",
            Violation::CycleDetected { .. } => "CycleDetected",
            Violation::InitialTaskHasPredecessors { .. } => "InitialTaskHasPredecessors",
            Violation::NotReachableFromInitial { .. } => "NotReachableFromInitial",
            Violation::FinalTaskNotSuccessor { .. } => "FinalTaskNotSuccessor",
            Violation::EvaluatorConfigMismatch { .. } => "EvaluatorConfigMismatch",
            Violation::InvalidThreshold { .. } => "InvalidThreshold",
            Violation::InvalidEvaluatorTarget { .. } => "InvalidEvaluatorTarget",
            Violation::InvalidGuard { .. } => "InvalidGuard",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: ", self.class())?;
        match self {
            Violation::DuplicateTaskId { task } => write!(f, "task id '{task}' is declared more than once"),
            Violation::DuplicateAgentId { agent } => write!(f, "agent id '{agent}' is declared more than once"),
            Violation::EmptyRolePrompt { agent } => write!(f, "agent '{agent}' has an empty role prompt"),
            Violation::UnknownAgent { task, agent } => write!(f, "task '{task}' uses unknown agent '{agent}'"),
            Violation::UnknownTool { task, tool } => write!(f, "task '{task}' uses unregistered tool '{tool}'"),
            Violation::UnknownCallback { task, callback } => {
                write!(f, "task '{task}' declares unknown callback '{callback}'")
            }
            Violation::UnknownPredecessor { task, predecessor } => {
                write!(f, "edge {predecessor} -> {task} references unknown task '{predecessor}'")
            }
            Violation::UnknownPrecTask { task } => {
                write!(f, "precedence map has an entry for unknown task '{task}'")
            }
            Violation::UnknownInitialTask { task } => write!(f, "initial task '{task}' is not declared"),
            Violation::UnknownFinalTask { task } => write!(f, "final task '{task}' is not declared"),
            Violation::CycleDetected { tasks } => {
                write!(f, "precedence cycle among tasks {}", tasks.join(", "))
            }
            Violation::InitialTaskHasPredecessors { task, predecessors } => write!(
                f,
                "initial task '{task}' has predecessors {}",
                predecessors.join(", ")
            ),
            Violation::NotReachableFromInitial { task } => {
                write!(f, "task '{task}' does not (transitively) follow the initial task")
            }
            Violation::FinalTaskNotSuccessor { task } => {
                write!(f, "the final task does not (transitively) follow task '{task}'")
            }
            Violation::EvaluatorConfigMismatch { task } => write!(
                f,
                "task '{task}': an evaluator configuration is required for, and only for, evaluator tasks"
            ),
            Violation::InvalidThreshold { task, threshold } => {
                write!(f, "task '{task}': threshold {threshold} is outside [1, 10]")
            }
            Violation::InvalidEvaluatorTarget { task, target } => write!(
                f,
                "task '{task}': evaluated task '{target}' is not a predecessor of the evaluator"
            ),
            Violation::InvalidGuard { task, router, reason } => {
                write!(f, "task '{task}': guard on '{router}' {reason}")
            }
        }
    }
}

/// Kahn's algorithm over the declared tasks, picking the smallest ready id.
/// Returns the order and the tasks on cycles (non-empty iff there is one).
/// Edges from unknown tasks are ignored.
pub(crate) fn topological_order(spec: &WorkflowSpec) -> (Vec<String>, Vec<String>) {
    let ids: BTreeSet<&str> = spec.tasks.iter().map(|t| t.id.as_str()).collect();
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|&id| (id, 0)).collect();
    let mut successors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &id in &ids {
        for p in spec.predecessors(id).filter(|p| ids.contains(p)) {
            *indegree.get_mut(id).expect("id is declared") += 1;
            successors.entry(p).or_default().push(id);
        }
    }
    let mut ready: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(ids.len());
    while let Some(next) = ready.pop_first() {
        order.push(next.to_string());
        for &s in successors.get(next).into_iter().flatten() {
            let d = indegree.get_mut(s).expect("id is declared");
            *d -= 1;
            if *d == 0 {
                ready.insert(s);
            }
        }
    }
    // Tasks left over lie on a cycle or downstream of one; peel off the
    // downstream ones so that only cycle members are reported.
    let mut remaining: BTreeSet<&str> = indegree
        .into_iter()
        .filter(|(_, d)| *d > 0)
        .map(|(id, _)| id)
        .collect();
    loop {
        let sinks: Vec<&str> = remaining
            .iter()
            .copied()
            .filter(|id| {
                !successors
                    .get(id)
                    .into_iter()
                    .flatten()
                    .any(|s| remaining.contains(s))
            })
            .collect();
        if sinks.is_empty() {
            break;
        }
        for s in sinks {
            remaining.remove(s);
        }
    }
    (order, remaining.into_iter().map(str::to_owned).collect())
}

/// Transitive predecessors of each task. Only meaningful for acyclic specs.
fn ancestors(spec: &WorkflowSpec, order: &[String]) -> BTreeMap<String, BTreeSet<String>> {
    let mut result: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for id in order {
        let mut set = BTreeSet::new();
        for p in spec.predecessors(id) {
            if let Some(pa) = result.get(p) {
                set.extend(pa.iter().cloned());
                set.insert(p.to_string());
            }
        }
        result.insert(id.clone(), set);
    }
    result
}

/// Every broken structural rule of `spec`; empty iff the workflow is valid.
pub fn validate(spec: &WorkflowSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for t in &spec.tasks {
        if !seen.insert(t.id.as_str()) {
            out.push(Violation::DuplicateTaskId { task: t.id.clone() });
        }
    }
    let mut seen_agents = BTreeSet::new();
    for a in &spec.agents {
        if !seen_agents.insert(a.id.as_str()) {
            out.push(Violation::DuplicateAgentId {
                agent: a.id.clone(),
            });
        }
        if a.role_prompt.trim().is_empty() {
            out.push(Violation::EmptyRolePrompt {
                agent: a.id.clone(),
            });
        }
    }
    for t in &spec.tasks {
        if !seen_agents.contains(t.agent_id.as_str()) {
            out.push(Violation::UnknownAgent {
                task: t.id.clone(),
                agent: t.agent_id.clone(),
            });
        }
        for tool in t.tool_names.iter().filter(|n| !spec.registry.contains(n)) {
            out.push(Violation::UnknownTool {
                task: t.id.clone(),
                tool: tool.clone(),
            });
        }
        for cb in &t.callback_names {
            if Callback::parse(cb).is_none() {
                out.push(Violation::UnknownCallback {
                    task: t.id.clone(),
                    callback: cb.clone(),
                });
            }
        }
        if (t.kind == TaskKind::Evaluator) != t.evaluator.is_some() {
            out.push(Violation::EvaluatorConfigMismatch { task: t.id.clone() });
        }
        if let Some(cfg) = &t.evaluator {
            if !(MIN_SCORE..=MAX_SCORE).contains(&cfg.threshold) {
                out.push(Violation::InvalidThreshold {
                    task: t.id.clone(),
                    threshold: cfg.threshold,
                });
            }
        }
    }
    for (task, preds) in &spec.prec {
        if !seen.contains(task.as_str()) {
            out.push(Violation::UnknownPrecTask { task: task.clone() });
        }
        for p in preds.iter().filter(|p| !seen.contains(p.as_str())) {
            out.push(Violation::UnknownPredecessor {
                task: task.clone(),
                predecessor: p.clone(),
            });
        }
    }
    let initial_known = seen.contains(spec.initial_task.as_str());
    let final_known = seen.contains(spec.final_task.as_str());
    if !initial_known {
        out.push(Violation::UnknownInitialTask {
            task: spec.initial_task.clone(),
        });
    }
    if !final_known {
        out.push(Violation::UnknownFinalTask {
            task: spec.final_task.clone(),
        });
    }
    let preds_of_initial: Vec<String> = spec
        .predecessors(&spec.initial_task)
        .map(str::to_owned)
        .collect();
    if !preds_of_initial.is_empty() {
        out.push(Violation::InitialTaskHasPredecessors {
            task: spec.initial_task.clone(),
            predecessors: preds_of_initial,
        });
    }

    let (order, cyclic) = topological_order(spec);
    if !cyclic.is_empty() {
        out.push(Violation::CycleDetected { tasks: cyclic });
        // Reachability is undefined on a cyclic relation.
        return out;
    }
    let anc = ancestors(spec, &order);
    let is_before = |a: &str, b: &str| anc.get(b).is_some_and(|s| s.contains(a));
    for id in &order {
        if initial_known && *id != spec.initial_task && !is_before(&spec.initial_task, id) {
            out.push(Violation::NotReachableFromInitial { task: id.clone() });
        }
        if final_known && *id != spec.final_task && !is_before(id, &spec.final_task) {
            out.push(Violation::FinalTaskNotSuccessor { task: id.clone() });
        }
    }
    for t in &spec.tasks {
        if let Some(cfg) = &t.evaluator {
            if !is_before(&cfg.target_task_id, &t.id) {
                out.push(Violation::InvalidEvaluatorTarget {
                    task: t.id.clone(),
                    target: cfg.target_task_id.clone(),
                });
            }
        }
        if let Some(g) = &t.guard {
            let reason = match spec.task(&g.router_task_id) {
                None => Some("names an unknown task"),
                Some(r) if r.kind != TaskKind::Router => Some("names a task that is not a router"),
                Some(_) if !is_before(&g.router_task_id, &t.id) => {
                    Some("names a router that does not precede the task")
                }
                Some(_) if g.expected_route_token.trim().is_empty() => {
                    Some("expects an empty route")
                }
                _ => None,
            };
            if let Some(reason) = reason {
                out.push(Violation::InvalidGuard {
                    task: t.id.clone(),
                    router: g.router_task_id.clone(),
                    reason: reason.into(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::test_support::{fig2_spec, spec_with};
    use crate::engine::{linearize, EngineError, EvaluatorConfig};
    use crate::task_kinds::RouterGuard;

    #[test]
    fn fig2_is_valid() {
        assert_eq!(validate(&fig2_spec()), vec![]);
        assert_eq!(linearize(&fig2_spec()).unwrap(), ["T1", "T2", "T3", "T4"]);
    }

    #[test]
    fn chain_order() {
        let spec = spec_with(
            &["T1", "T2", "T3"],
            &[("T1", "T2"), ("T2", "T3")],
            "T1",
            "T3",
        );
        assert_eq!(linearize(&spec).unwrap(), ["T1", "T2", "T3"]);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let spec = spec_with(
            &["T1", "T2", "A3", "T4"],
            &[("T1", "T2"), ("T1", "A3"), ("T2", "T4"), ("A3", "T4")],
            "T1",
            "T4",
        );
        assert_eq!(linearize(&spec).unwrap(), ["T1", "A3", "T2", "T4"]);
    }

    #[test]
    fn cycle_detected() {
        let mut spec = fig2_spec();
        spec.prec
            .entry("T2".into())
            .or_default()
            .insert("T3".into());
        spec.prec
            .entry("T3".into())
            .or_default()
            .insert("T2".into());
        let v = validate(&spec);
        assert!(v.iter().any(|v| v.class() == "CycleDetected"), "{v:?}");
        assert!(!v.iter().any(|v| v.class() == "InitialTaskHasPredecessors"));
        assert!(matches!(
            linearize(&spec),
            Err(EngineError::InvalidWorkflow(_))
        ));
    }

    #[test]
    fn initial_with_predecessors() {
        let spec = spec_with(
            &["T0", "T1", "T2"],
            &[("T0", "T1"), ("T1", "T2")],
            "T1",
            "T2",
        );
        let classes: Vec<_> = validate(&spec).iter().map(Violation::class).collect();
        assert!(
            classes.contains(&"InitialTaskHasPredecessors"),
            "{classes:?}"
        );
    }

    #[test]
    fn reachability_rules() {
        // T3 hangs off T1 but never reaches the final task.
        let spec = spec_with(
            &["T1", "T2", "T3"],
            &[("T1", "T2"), ("T1", "T3")],
            "T1",
            "T2",
        );
        assert_eq!(
            validate(&spec),
            vec![Violation::FinalTaskNotSuccessor { task: "T3".into() }]
        );
        // T0 is a second source.
        let spec = spec_with(
            &["T0", "T1", "T2"],
            &[("T1", "T2"), ("T0", "T2")],
            "T1",
            "T2",
        );
        assert_eq!(
            validate(&spec),
            vec![Violation::NotReachableFromInitial { task: "T0".into() }]
        );
    }

    #[test]
    fn reference_rules() {
        let mut spec = fig2_spec();
        spec.tasks[1].agent_id = "ghost".into();
        spec.tasks[1].tool_names.insert("magic".into());
        spec.tasks[1].callback_names.push("explode".into());
        spec.prec.get_mut("T4").unwrap().insert("T9".into());
        let classes: Vec<_> = validate(&spec).iter().map(Violation::class).collect();
        for c in [
            "UnknownAgent",
            "UnknownTool",
            "UnknownCallback",
            "UnknownPredecessor",
        ] {
            assert!(classes.contains(&c), "{c} missing from {classes:?}");
        }
    }

    #[test]
    fn evaluator_and_guard_rules() {
        let mut spec = fig2_spec();
        spec.tasks[3].kind = TaskKind::Evaluator;
        assert_eq!(
            validate(&spec),
            vec![Violation::EvaluatorConfigMismatch { task: "T4".into() }]
        );
        spec.tasks[3].evaluator = Some(EvaluatorConfig {
            threshold: 0.5,
            max_retries: 2,
            target_task_id: "T4".into(),
        });
        let classes: Vec<_> = validate(&spec).iter().map(Violation::class).collect();
        assert_eq!(classes, ["InvalidThreshold", "InvalidEvaluatorTarget"]);

        let mut spec = fig2_spec();
        spec.tasks[2].guard = Some(RouterGuard {
            router_task_id: "T1".into(),
            expected_route_token: "x".into(),
        });
        let v = validate(&spec);
        assert!(matches!(&v[..], [Violation::InvalidGuard { task, .. }] if task == "T3"));
        spec.tasks[0].kind = TaskKind::Router;
        assert_eq!(validate(&spec), vec![]);
    }
}
