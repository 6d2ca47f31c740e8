//! Agent workflow engine for process-mining analyses.
//!
//! A workflow combines deterministic string-to-string tools (backed by the
//! [`event_log`] algorithms and exposed through [`pm_tools`]) with
//! nondeterministic agent tasks ([`agents`]) arranged in a precedence DAG
//! and executed sequentially by the [`engine`].

pub mod agents;
pub mod demos;
pub mod engine;
pub mod event_log;
pub mod pm_tools;
pub mod task_kinds;
