use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use agwf_core::agents::{
    http_chat_backend, CompletionBackend, HttpDefaults, ScriptedBackend, ENV_API_KEY, ENV_ENDPOINT,
};
use agwf_core::demos::{demo, Demo};
use agwf_core::engine::{
    execute, linearize, validate, Backends, EntityMemory, ExecutionFailure, ExecutionRecord,
    WorkflowSpec,
};
use agwf_core::event_log::{discover_dfg, discover_variants, EventLog};
use agwf_core::pm_tools::{
    abstract_dfg, abstract_variants, builtin_registry, DEFAULT_DFG_TOP_K, DEFAULT_VARIANTS_TOP_K,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Run agent workflows over process-mining tools.
#[derive(Debug, Parser)]
#[command(name = "agwf", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a workflow file and print its violations.
    Validate { workflow: PathBuf },
    /// Execute a workflow file on an inquiry.
    Run(RunArgs),
    /// Print the textual abstraction of an event log.
    Abstract {
        log: PathBuf,
        #[arg(long, value_enum)]
        kind: AbstractionKind,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        top_k: Option<u64>,
    },
    /// Run a bundled demo workflow on its synthetic log.
    Demo(DemoArgs),
    /// List the registered tools with their documentation.
    Tools,
}

#[derive(Debug, Args)]
struct RunArgs {
    workflow: PathBuf,
    #[arg(long)]
    inquiry: String,
    #[command(flatten)]
    backend: BackendArgs,
    /// Preload an event log into entity memory, e.g. `--load log=p2p.xes`.
    #[arg(long, value_name = "KEY=PATH")]
    load: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct BackendArgs {
    /// Answer from a scripted-rules JSON file.
    #[arg(long, value_name = "RULES")]
    scripted: Option<PathBuf>,
    /// OpenAI-compatible chat-completions URL (default: $AGWF_ENDPOINT).
    #[arg(long, value_name = "URL", num_args = 0..=1, default_missing_value = "")]
    http: Option<String>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(value_enum)]
    name: DemoName,
    /// Scripted answers; without a file the demo's bundled rules are used.
    #[arg(long, value_name = "RULES", num_args = 0..=1, conflicts_with = "http")]
    scripted: Option<Option<PathBuf>>,
    /// OpenAI-compatible chat-completions URL (default: $AGWF_ENDPOINT).
    #[arg(long, value_name = "URL", num_args = 0..=1, default_missing_value = "")]
    http: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Write the JSON transcript of the run here.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Also print the final state.
    #[arg(long)]
    show_state: bool,
    /// Model used when an agent does not name one.
    #[arg(long, default_value = "gpt-4o-mini")]
    model: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AbstractionKind {
    Dfg,
    Variants,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DemoName {
    Violations,
    Fairness,
    Rca,
}

/// Exit status 1 (execution or validation failure) or 2 (usage or parse).
enum Failure {
    Execution(String),
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Validate { workflow } => cmd_validate(&workflow),
        Command::Run(args) => cmd_run(args),
        Command::Abstract { log, kind, top_k } => cmd_abstract(&log, kind, top_k),
        Command::Demo(args) => cmd_demo(args),
        Command::Tools => cmd_tools(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Execution(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn load_spec(path: &Path) -> Result<WorkflowSpec, Failure> {
    WorkflowSpec::from_path(path, Arc::new(builtin_registry())).map_err(usage)
}

fn cmd_validate(path: &Path) -> Outcome {
    let spec = load_spec(path)?;
    let violations = validate(&spec);
    if violations.is_empty() {
        let order = linearize(&spec).map_err(|e| Failure::Execution(e.to_string()))?;
        println!(
            "valid: {} tasks, order {}",
            spec.tasks.len(),
            order.join(" -> ")
        );
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Execution(format!(
        "{} violation(s) in {}",
        violations.len(),
        path.display()
    )))
}

fn http_backend(url: &str, model: &str) -> Result<Arc<dyn CompletionBackend>, Failure> {
    let endpoint = if url.is_empty() {
        std::env::var(ENV_ENDPOINT)
            .ok()
            .filter(|e| !e.is_empty())
            .ok_or_else(|| usage(format!("--http needs a URL or {ENV_ENDPOINT}")))?
    } else {
        url.to_string()
    };
    let defaults = HttpDefaults {
        model: model.to_string(),
        ..HttpDefaults::default()
    };
    let key = std::env::var(ENV_API_KEY).unwrap_or_default();
    Ok(Arc::new(http_chat_backend(endpoint, key, defaults)))
}

fn scripted_backend(path: &Path) -> Result<Arc<dyn CompletionBackend>, Failure> {
    Ok(Arc::new(ScriptedBackend::from_path(path).map_err(usage)?))
}

fn cmd_run(args: RunArgs) -> Outcome {
    let spec = load_spec(&args.workflow)?;
    let violations = validate(&spec);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(Failure::Execution("the workflow is invalid".into()));
    }
    let backend = match (&args.backend.scripted, &args.backend.http) {
        (Some(rules), _) => scripted_backend(rules)?,
        (None, Some(url)) => http_backend(url, &args.output.model)?,
        (None, None) => unreachable!("clap requires one backend"),
    };
    let mut memory = EntityMemory::new();
    for entry in &args.load {
        let (key, path) = entry
            .split_once('=')
            .ok_or_else(|| usage(format!("--load expects KEY=PATH, got '{entry}'")))?;
        let log = EventLog::from_path(path).map_err(usage)?;
        memory
            .store(key.trim_start_matches('@'), log)
            .map_err(usage)?;
    }
    let result = execute(&spec, &args.inquiry, &Backends::new(backend), memory);
    report(result, &args.output)
}

fn cmd_demo(args: DemoArgs) -> Outcome {
    let name = match args.name {
        DemoName::Violations => "violations",
        DemoName::Fairness => "fairness",
        DemoName::Rca => "rca",
    };
    let d: Demo = demo(name).expect("every DemoName is bundled");
    let backend: Arc<dyn CompletionBackend> = match (&args.scripted, &args.http) {
        (Some(Some(rules)), _) => scripted_backend(rules)?,
        (None, Some(url)) => http_backend(url, &args.output.model)?,
        _ => Arc::new(d.scripted_backend().map_err(usage)?),
    };
    report(d.run(&Backends::new(backend)), &args.output)
}

fn write_transcript(path: &Path, record: &ExecutionRecord) -> Outcome {
    let json = serde_json::to_string_pretty(record).expect("records serialize");
    std::fs::write(path, json + "\n")
        .map_err(|e| Failure::Execution(format!("cannot write {}: {e}", path.display())))
}

fn report(result: Result<ExecutionRecord, ExecutionFailure>, out: &OutputArgs) -> Outcome {
    match result {
        Ok(record) => {
            if let Some(path) = &out.output {
                write_transcript(path, &record)?;
            }
            if out.show_state {
                println!("{}\n", record.final_state());
            }
            println!("{}", record.final_output.as_deref().unwrap_or_default());
            let failed: Vec<String> = record
                .tool_errors()
                .map(|d| {
                    format!(
                        "task {} ({}): {}",
                        d.task_id,
                        d.selected_tool.as_deref().unwrap_or("?"),
                        d.tool_output.as_deref().unwrap_or_default()
                    )
                })
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Execution(format!(
                    "the run completed with tool errors:\n{}",
                    failed.join("\n")
                )))
            }
        }
        Err(failure) => {
            if let Some(path) = &out.output {
                write_transcript(path, &failure.partial)?;
            }
            Err(Failure::Execution(failure.error.to_string()))
        }
    }
}

fn cmd_abstract(path: &Path, kind: AbstractionKind, top_k: Option<u64>) -> Outcome {
    let log = EventLog::from_path(path).map_err(usage)?;
    let text = match kind {
        AbstractionKind::Dfg => abstract_dfg(
            &discover_dfg(&log),
            top_k.map_or(DEFAULT_DFG_TOP_K, |k| k as usize),
        ),
        AbstractionKind::Variants => abstract_variants(
            &discover_variants(&log),
            top_k.map_or(DEFAULT_VARIANTS_TOP_K, |k| k as usize),
        ),
    };
    println!("{text}");
    Ok(())
}

fn cmd_tools() -> Outcome {
    let registry = builtin_registry();
    for tool in registry.tools() {
        println!("{}\n    {}\n", tool.name(), tool.documentation());
    }
    Ok(())
}
