//! Command-line front end. `run` is the whole program minus process exit so
//! tests can drive it in-process.
//!
//! Exit codes: 0 success, 1 pipeline or runtime failure, 2 configuration or
//! usage failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, CONFIG_ENV};
use crate::error::Error;
use crate::eval::{self, load_dataset, AblationConfig, AblationReport, Dataset, EvalOptions, Variant};
use crate::kg_store::{EntityId, KnowledgeGraph};
use crate::retrieval::{extract_mentions, find_paths, match_all};
use crate::verbalize::path_to_text;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kgprompt", version, about = "Knowledge-graph-enhanced prompt classification")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify one text and print the prediction with its explanation.
    Predict(PredictArgs),
    /// Evaluate the full model on a dataset.
    Evaluate(EvalArgs),
    /// Evaluate every ablation variant on a dataset.
    Ablate(EvalArgs),
    /// Inspect the knowledge graph.
    #[command(subcommand)]
    Kg(KgCommand),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Template preset name or literal template.
    #[arg(long)]
    template: Option<String>,
    /// Verbalizer preset name or TSV file.
    #[arg(long)]
    verbalizer: Option<String>,
    /// Encoder seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    text: String,
    /// Also print the human-readable explanation to stderr.
    #[arg(long)]
    explain: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// generic | chip-ctc | imcs-v2 | kuake-qtr
    #[arg(long)]
    format: Option<String>,
    /// Output directory for report.tsv, report.json and explanations.jsonl.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum KgCommand {
    /// List every reasoning path between two entities.
    Paths {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        max_len: Option<usize>,
    },
    /// Show mentions found in a text and the entities they link to.
    Match {
        #[arg(long)]
        text: String,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Template(_) | Error::Dataset(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> CliResult {
    let config_path = cli
        .config
        .ok_or_else(|| Failure::Usage(format!("no configuration: pass --config or set {CONFIG_ENV}")))?;
    let mut cfg = RunConfig::load(&config_path)?;
    match cli.command {
        Command::Predict(args) => {
            apply_overrides(&mut cfg, &args.overrides)?;
            cmd_predict(&cfg, &args.text, args.explain, stdout)
        }
        Command::Evaluate(args) => {
            let (ds, opts) = prepare_eval(&mut cfg, &args)?;
            cmd_evaluate(&cfg, &ds, &opts, &args.out, stdout)
        }
        Command::Ablate(args) => {
            let (ds, opts) = prepare_eval(&mut cfg, &args)?;
            let graph = Arc::new(cfg.load_graph()?);
            let (report, records) = eval::run_ablation(&cfg, graph, &ds, &AblationConfig::all(), &opts)?;
            write_reports(&report, &records, &args.out)?;
            stdout.write_all(report.to_tsv().as_bytes())?;
            Ok(())
        }
        Command::Kg(KgCommand::Paths { from, to, max_len }) => {
            let graph = cfg.load_graph()?;
            cmd_kg_paths(&graph, &from, &to, max_len.unwrap_or(cfg.settings.max_path_len), stdout)
        }
        Command::Kg(KgCommand::Match { text }) => {
            let graph = cfg.load_graph()?;
            cmd_kg_match(&graph, &text, cfg.settings.theta, stdout)
        }
    }
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) -> CliResult {
    let cwd = Path::new(".");
    if let Some(t) = &o.template {
        cfg.set("prompt.template", t, cwd)?;
    }
    if let Some(v) = &o.verbalizer {
        cfg.set("verbalizer.source", v, cwd)?;
    }
    if let Some(s) = o.seed {
        cfg.encoder.seed = s;
    }
    Ok(())
}

fn prepare_eval(cfg: &mut RunConfig, args: &EvalArgs) -> CliResult<(Dataset, EvalOptions)> {
    apply_overrides(cfg, &args.overrides)?;
    if let Some(d) = &args.dataset {
        cfg.dataset_path = Some(d.clone());
    }
    if let Some(f) = &args.format {
        cfg.set("eval.format", f, Path::new("."))?;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    cfg.validate()?;
    let path = cfg
        .dataset_path
        .clone()
        .ok_or_else(|| Failure::Usage("no dataset: pass --dataset or set eval.dataset".into()))?;
    if !path.is_file() {
        return Err(Failure::Usage(format!("dataset {} does not exist", path.display())));
    }
    let ds = load_dataset(&path, cfg.dataset_format)?;
    Ok((ds, EvalOptions { repeats: cfg.repeats, jobs: args.jobs }))
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    prediction: &'a crate::predict::Prediction,
    explanation: &'a crate::eval::ExplanationRecord,
}

fn cmd_predict(cfg: &RunConfig, text: &str, explain: bool, stdout: &mut dyn Write) -> CliResult {
    let graph = Arc::new(cfg.load_graph()?);
    let pipeline = cfg.build_pipeline(graph)?;
    let c = pipeline.classify("input", text)?;
    let json = serde_json::to_string_pretty(&PredictOutput { prediction: &c.prediction, explanation: &c.explanation })
        .map_err(Error::from)?;
    writeln!(stdout, "{json}")?;
    if explain {
        write!(stdout, "{}", c.explanation.render())?;
    }
    Ok(())
}

/// Evaluates the full configuration and writes its report files into `out`.
fn cmd_evaluate(cfg: &RunConfig, ds: &Dataset, opts: &EvalOptions, out: &Path, stdout: &mut dyn Write) -> CliResult {
    let graph = Arc::new(cfg.load_graph()?);
    let (report, records) = eval::run_ablation(cfg, graph, ds, &[AblationConfig::new(Variant::Full)], opts)?;
    write_reports(&report, &records, out)?;
    stdout.write_all(report.to_tsv().as_bytes())?;
    Ok(())
}

fn write_reports(report: &AblationReport, records: &[crate::eval::ExplanationRecord], out: &Path) -> CliResult {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.tsv"), report.to_tsv())?;
    fs::write(out.join("report.json"), report.to_json()?)?;
    let mut buf = Vec::new();
    eval::explain::write_jsonl(records, &mut buf)?;
    fs::write(out.join("explanations.jsonl"), buf)?;
    Ok(())
}

fn cmd_kg_paths(g: &KnowledgeGraph, from: &str, to: &str, max_len: usize, stdout: &mut dyn Write) -> CliResult {
    if max_len == 0 {
        return Err(Failure::Usage("--max-len must be at least 1".into()));
    }
    let set = find_paths(g, &EntityId::from(from), &EntityId::from(to), max_len)?;
    for (i, p) in set.paths.iter().enumerate() {
        writeln!(stdout, "{i}\t{}", path_to_text(p, g)?)?;
    }
    Ok(())
}

fn cmd_kg_match(g: &KnowledgeGraph, text: &str, theta: f64, stdout: &mut dyn Write) -> CliResult {
    let mentions = extract_mentions(text, g);
    let (matched, unmatched) = match_all(&mentions, g, theta);
    for m in &matched {
        writeln!(stdout, "{}\t{}\t{:.4}", m.mention.surface, m.entity.as_str(), m.score)?;
    }
    for m in &unmatched {
        writeln!(stdout, "{}\t-\t-", m.surface)?;
    }
    Ok(())
}
