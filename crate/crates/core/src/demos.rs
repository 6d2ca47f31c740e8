//! Bundled example workflows with synthetic logs and scripted agent answers.
//!
//! | name | workflow | log |
//! |------|----------|-----|
//! | `violations` | optimizer, DFG and variants analyses, ensemble | `p2p.xes`: 24 purchase-to-pay cases, 10 of them violating the normal order |
//! | `fairness` | protected-group identification, log split, group comparison | `loans.csv`: 40 loan cases; only the 20 with `gender = "F"` pass through `Extra Check` |
//! | `rca` | DFG-based insights, confidence grading with wrap-back, chain of thought | `p2p.xes` |
//!
//! Each demo preloads its log into entity memory as `@log`; the inquiries
//! refer to it by that key.

use std::sync::Arc;

use crate::agents::{ScriptError, ScriptedBackend};
use crate::engine::{
    execute, Backends, ConfigError, EntityMemory, ExecutionFailure, ExecutionRecord, WorkflowSpec,
};
use crate::event_log::{parse_csv, parse_xes, CsvMapping, EventLog, EventLogError};
use crate::pm_tools::builtin_registry;

pub const DEMO_NAMES: [&str; 3] = ["violations", "fairness", "rca"];

/// Entity-memory key of the preloaded log.
pub const LOG_KEY: &str = "log";

const P2P_XES: &str = include_str!("../demos/p2p.xes");
const LOANS_CSV: &str = include_str!("../demos/loans.csv");

#[derive(Debug, Clone, Copy)]
pub struct Demo {
    pub name: &'static str,
    pub inquiry: &'static str,
    pub workflow_json: &'static str,
    pub rules_json: &'static str,
    pub log_file: &'static str,
    log_text: &'static str,
}

pub fn demo(name: &str) -> Option<Demo> {
    let d = match name {
        "violations" => Demo {
            name: "violations",
            inquiry: "Tell me the violations in the process contained in the event log @log",
            workflow_json: include_str!("../demos/violations.json"),
            rules_json: include_str!("../demos/violations.rules.json"),
            log_file: "p2p.xes",
            log_text: P2P_XES,
        },
        "fairness" => Demo {
            name: "fairness",
            inquiry: "Is the loan process in the event log @log unfair towards female applicants?",
            workflow_json: include_str!("../demos/fairness.json"),
            rules_json: include_str!("../demos/fairness.rules.json"),
            log_file: "loans.csv",
            log_text: LOANS_CSV,
        },
        "rca" => Demo {
            name: "rca",
            inquiry: "What are the root causes of the delayed payments in the event log @log?",
            workflow_json: include_str!("../demos/rca.json"),
            rules_json: include_str!("../demos/rca.rules.json"),
            log_file: "p2p.xes",
            log_text: P2P_XES,
        },
        _ => return None,
    };
    Some(d)
}

impl Demo {
    pub fn spec(&self) -> Result<WorkflowSpec, ConfigError> {
        WorkflowSpec::from_json(self.workflow_json, Arc::new(builtin_registry()))
    }

    pub fn log(&self) -> Result<EventLog, EventLogError> {
        let mut log = if self.log_file.ends_with(".csv") {
            parse_csv(self.log_text, &CsvMapping::default())?
        } else {
            parse_xes(self.log_text)?
        };
        log.source_name = self.log_file.to_string();
        Ok(log)
    }

    /// Memory holding the demo log under [`LOG_KEY`].
    pub fn memory(&self) -> Result<EntityMemory, EventLogError> {
        let mut memory = EntityMemory::new();
        memory
            .store(LOG_KEY, self.log()?)
            .expect("fresh memory has no keys");
        Ok(memory)
    }

    pub fn scripted_backend(&self) -> Result<ScriptedBackend, ScriptError> {
        ScriptedBackend::from_json(self.rules_json)
    }

    /// Run the demo with its scripted answers.
    pub fn run_scripted(&self) -> Result<ExecutionRecord, ExecutionFailure> {
        let backend = self.scripted_backend().expect("bundled rules are valid");
        self.run(&Backends::single(backend))
    }

    pub fn run(&self, backends: &Backends) -> Result<ExecutionRecord, ExecutionFailure> {
        let spec = self.spec().expect("bundled workflow is valid");
        let memory = self.memory().expect("bundled log is valid");
        execute(&spec, self.inquiry, backends, memory)
    }
}
