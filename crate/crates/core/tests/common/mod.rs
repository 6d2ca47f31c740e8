//! Helpers shared by the integration tests: fixture paths, log builders,
//! brute-force oracles and random workflow generators.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use agwf_core::agents::AgentProfile;
use agwf_core::engine::{TaskSpec, WorkflowSpec};
use agwf_core::event_log::{AttributeValue, Event, EventLog, Trace};
use agwf_core::pm_tools::builtin_registry;
use agwf_core::task_kinds::TaskKind;
use chrono::{DateTime, Duration};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// One trace per activity sequence; events one minute apart, case `i` has
/// case attribute `n = i` and `parity = "even" | "odd"`.
pub fn log_of(cases: &[Vec<String>]) -> EventLog {
    let start = DateTime::parse_from_rfc3339("2024-01-01T00:00:00+00:00").unwrap();
    let traces = cases
        .iter()
        .enumerate()
        .map(|(i, acts)| Trace {
            case_id: format!("c{i}"),
            case_attributes: BTreeMap::from([
                ("n".to_string(), AttributeValue::Int(i as i64)),
                (
                    "parity".to_string(),
                    AttributeValue::Text(if i % 2 == 0 { "even" } else { "odd" }.into()),
                ),
            ]),
            events: acts
                .iter()
                .enumerate()
                .map(|(j, a)| Event {
                    activity: a.clone(),
                    timestamp: start + Duration::seconds(60 * j as i64 + i as i64),
                    attributes: BTreeMap::new(),
                })
                .collect(),
        })
        .collect();
    EventLog::new("generated", traces)
}

pub type NaiveDfg = (
    BTreeMap<(String, String), u64>,
    BTreeMap<String, u64>,
    BTreeMap<String, u64>,
);

/// Directly-follows counts by explicit pair enumeration.
pub fn naive_dfg(cases: &[Vec<String>]) -> NaiveDfg {
    let mut edges = BTreeMap::new();
    let mut starts = BTreeMap::new();
    let mut ends = BTreeMap::new();
    for acts in cases {
        for i in 0..acts.len() {
            for j in 0..acts.len() {
                if j == i + 1 {
                    *edges.entry((acts[i].clone(), acts[j].clone())).or_insert(0) += 1;
                }
            }
        }
        if let Some(first) = acts.first() {
            *starts.entry(first.clone()).or_insert(0) += 1;
        }
        if let Some(last) = acts.last() {
            *ends.entry(last.clone()).or_insert(0) += 1;
        }
    }
    (edges, starts, ends)
}

/// Variant counts by comparing every case with every other.
pub fn naive_variants(cases: &[Vec<String>]) -> BTreeMap<Vec<String>, u64> {
    let mut out = BTreeMap::new();
    for a in cases {
        let count = cases.iter().filter(|b| *b == a).count() as u64;
        out.insert(a.clone(), count);
    }
    out
}

/// Up to `max_traces` traces of up to `max_events` events over an alphabet of
/// `alphabet` activities.
pub fn random_cases(
    rng: &mut impl Rng,
    max_traces: usize,
    max_events: usize,
    alphabet: usize,
) -> Vec<Vec<String>> {
    let letters = ["a", "b", "c", "d", "e", "f"];
    let n = rng.gen_range(0..=max_traces);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_events);
            (0..len)
                .map(|_| letters[rng.gen_range(0..alphabet)].to_string())
                .collect()
        })
        .collect()
}

/// Task ids in topological position order; names are shuffled so that
/// neither declaration order nor the tie-break follows the topology.
fn random_ids(rng: &mut impl Rng, n: usize) -> Vec<String> {
    let mut pool: Vec<String> = (0..26)
        .map(|i| format!("{}{}", (b'a' + i as u8) as char, rng.gen_range(0..10)))
        .collect();
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}

fn spec_from(
    ids: &[String],
    prec: BTreeMap<String, BTreeSet<String>>,
    rng: &mut impl Rng,
) -> WorkflowSpec {
    let mut tasks: Vec<TaskSpec> = ids
        .iter()
        .map(|id| {
            TaskSpec::new(
                id.clone(),
                TaskKind::Plain,
                "agent",
                format!("Do {id}."),
                "Some text.",
            )
        })
        .collect();
    tasks.shuffle(rng);
    WorkflowSpec {
        tasks,
        prec,
        initial_task: ids[0].clone(),
        final_task: ids[ids.len() - 1].clone(),
        agents: vec![AgentProfile::new("agent", "You are a process analyst.")],
        registry: Arc::new(builtin_registry()),
    }
}

/// A valid workflow of `2..=max_tasks` plain tasks.
pub fn random_valid_workflow(rng: &mut impl Rng, max_tasks: usize) -> WorkflowSpec {
    let n = rng.gen_range(2..=max_tasks);
    let ids = random_ids(rng, n);
    let mut prec: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut has_successor = vec![false; n];
    for j in 1..n {
        let first = rng.gen_range(0..j);
        let mut preds = BTreeSet::from([first]);
        for i in 0..j {
            if rng.gen_bool(0.3) {
                preds.insert(i);
            }
        }
        for &i in &preds {
            has_successor[i] = true;
        }
        prec.insert(
            ids[j].clone(),
            preds.into_iter().map(|i| ids[i].clone()).collect(),
        );
    }
    for i in 0..n - 1 {
        if !has_successor[i] {
            prec.get_mut(&ids[n - 1]).unwrap().insert(ids[i].clone());
        }
    }
    spec_from(&ids, prec, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injected {
    /// Two non-initial tasks made mutual predecessors.
    Cycle,
    /// The initial task given a predecessor.
    InitialPredecessor,
}

impl Injected {
    pub fn class(self) -> &'static str {
        match self {
            Injected::Cycle => "CycleDetected",
            Injected::InitialPredecessor => "InitialTaskHasPredecessors",
        }
    }
}

/// A valid workflow of at least three tasks with one injected defect.
pub fn random_invalid_workflow(rng: &mut impl Rng, max_tasks: usize) -> (WorkflowSpec, Injected) {
    let mut spec = random_valid_workflow(rng, max_tasks);
    while spec.tasks.len() < 3 {
        spec = random_valid_workflow(rng, max_tasks);
    }
    let others: Vec<String> = spec
        .tasks
        .iter()
        .map(|t| t.id.clone())
        .filter(|id| *id != spec.initial_task)
        .collect();
    let kind = if rng.gen_bool(0.5) {
        Injected::Cycle
    } else {
        Injected::InitialPredecessor
    };
    match kind {
        Injected::Cycle => {
            let pair: Vec<&String> = others.choose_multiple(rng, 2).collect();
            let (u, v) = (pair[0].clone(), pair[1].clone());
            spec.prec.entry(u.clone()).or_default().insert(v.clone());
            spec.prec.entry(v).or_default().insert(u);
        }
        Injected::InitialPredecessor => {
            let p = others.choose(rng).unwrap().clone();
            spec.prec
                .entry(spec.initial_task.clone())
                .or_default()
                .insert(p);
        }
    }
    (spec, kind)
}
