//! Command-line interface: `train`, `eval`, `fewshot`, `inspect`.
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::config::{parse_node_ref, RunConfig};
use crate::harness::{self, HarnessError, TrainOptions};
use crate::tasks::{self, CoincidenceTask, CsvSchema, Dataset, FewShotProtocol};
use crate::topology::NodeRef;

#[derive(Parser)]
#[command(name = "livewire", version, about = "Sparse training engine with learned topology")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network from a config file on a CSV file or task spec.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run the few-shot adaptation protocol with its control arm.
    Fewshot(FewshotArgs),
    /// Print topology statistics and per-node details of a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV file (path ending in .csv) or a task-spec TOML file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Resume from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Evaluate on this dataset after training.
    #[arg(long)]
    eval_data: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column statistics + label vocabulary fitted at training time
    /// (written as csv_schema.json by `train` on CSV data).
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Loss to report.
    #[arg(long, default_value = "softmax-cross-entropy")]
    loss: String,
}

#[derive(Args)]
struct FewshotArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated node list, e.g. 1:0,2:3.
    #[arg(long)]
    nodes: Option<String>,
    /// Event log (events.json) for mutual-information snapshots.
    #[arg(long)]
    events: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Training and evaluation failures that stem from the run itself
/// rather than from bad inputs.
fn classify(e: HarnessError) -> CliError {
    match &e {
        HarnessError::Config(_)
        | HarnessError::Init(_)
        | HarnessError::DataWidth { .. }
        | HarnessError::LabelRange { .. }
        | HarnessError::BadTrackedNode(_)
        | HarnessError::FewshotShape(_)
        | HarnessError::EmptyData => usage(e),
        _ => runtime(e),
    }
}

#[derive(Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
enum TaskSpec {
    Coincidence {
        samples: usize,
        #[serde(flatten)]
        cfg: CoincidenceTask,
    },
}

/// Load `--data`: .csv files go through the CSV reader (fitting or
/// reusing a schema), anything else parses as a task-spec TOML.
fn load_data(
    path: &Path,
    schema: Option<&Path>,
) -> Result<(Dataset, Option<CsvSchema>), CliError> {
    let is_csv = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    if is_csv {
        let schema = match schema {
            Some(p) => {
                let body = std::fs::read_to_string(p).map_err(usage)?;
                serde_json::from_str(&body).map_err(usage)?
            }
            None => CsvSchema::default(),
        };
        let (data, fitted) = tasks::load_csv(path, &schema).map_err(usage)?;
        Ok((data, Some(fitted)))
    } else {
        let body = std::fs::read_to_string(path).map_err(usage)?;
        let spec: TaskSpec = toml::from_str(&body).map_err(usage)?;
        match spec {
            TaskSpec::Coincidence { samples, cfg } => {
                let (data, _) = tasks::gen_coincidence(&cfg, samples).map_err(usage)?;
                Ok((data, None))
            }
        }
    }
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config).map_err(usage)?;
    let (data, fitted_schema) = load_data(&args.data, None)?;
    let opts = TrainOptions {
        out_dir: Some(args.out.clone()),
        resume_from: args.resume.clone(),
    };
    let outcome = harness::train(&cfg, &data, &opts).map_err(classify)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(schema) = fitted_schema {
        let path = args.out.join("csv_schema.json");
        let body = serde_json::to_string_pretty(&schema).map_err(runtime)?;
        std::fs::write(&path, body).map_err(runtime)?;
    }
    let last = outcome.records.last();
    println!(
        "trained {} steps, {} edges, final loss {}",
        outcome.network.step_count(),
        outcome.network.edge_count(),
        last.map_or_else(|| "n/a".into(), |r| format!("{:.6}", r.loss)),
    );
    if let Some(eval_path) = &args.eval_data {
        let schema_path = args.out.join("csv_schema.json");
        let schema = schema_path.exists().then_some(schema_path);
        let (eval_data, _) = load_data(eval_path, schema.as_deref())?;
        let report =
            harness::evaluate(&outcome.network, &eval_data, cfg.loss).map_err(classify)?;
        println!(
            "eval: loss {:.6} accuracy {:.4} over {} samples",
            report.loss, report.accuracy, report.n
        );
    }
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let loss = match args.loss.as_str() {
        "softmax-cross-entropy" => crate::LossKind::SoftmaxCrossEntropy,
        "mean-squared-error" => crate::LossKind::MeanSquaredError,
        other => return Err(CliError::Usage(format!("unknown loss '{other}'"))),
    };
    let net = crate::checkpoint::load(&args.checkpoint).map_err(usage)?;
    let (data, _) = load_data(&args.data, args.schema.as_deref())?;
    let report = harness::evaluate(&net, &data, loss).map_err(classify)?;
    println!(
        "loss {:.6} accuracy {:.4} over {} samples",
        report.loss, report.accuracy, report.n
    );
    Ok(())
}

fn cmd_fewshot(args: &FewshotArgs) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(&args.config).map_err(usage)?;
    let body = std::fs::read_to_string(&args.protocol).map_err(usage)?;
    let protocol: FewShotProtocol = toml::from_str(&body).map_err(usage)?;
    let report = harness::run_fewshot(&cfg, &protocol, Some(&args.out)).map_err(classify)?;
    println!(
        "livewired: base {:.4} -> {:.4} (drop {:+.4}), novel {:.4}, grew {} edges",
        report.livewired.base_acc_before,
        report.livewired.base_acc_after,
        report.livewired.base_drop,
        report.livewired.novel_acc,
        report.livewired.edges_grown,
    );
    println!(
        "control:   base {:.4} -> {:.4} (drop {:+.4}), novel {:.4}",
        report.control.base_acc_before,
        report.control.base_acc_after,
        report.control.base_drop,
        report.control.novel_acc,
    );
    println!(
        "forgetting no worse than control: {}; novel accuracy ratio {:.3}",
        report.drop_not_worse, report.novel_ratio
    );
    println!("report written to {}", args.out.join("fewshot_report.json").display());
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), CliError> {
    let nodes: Vec<NodeRef> = match &args.nodes {
        None => Vec::new(),
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| parse_node_ref(s.trim()).map_err(usage))
            .collect::<Result<_, _>>()?,
    };
    let report = harness::inspect(&args.checkpoint, &nodes, args.events.as_deref())
        .map_err(classify)?;
    print!("{}", report.render());
    Ok(())
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Fewshot(args) => cmd_fewshot(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
