//! Command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{analyze_example, explain_example, AnalysisOptions};
use crate::dataset::{filter_correct, load_squad, QaExample};
use crate::error::{Error, Result};
use crate::models::{AnswererHandle, PROBE_CONTEXT, PROBE_QUESTION};
use crate::reducer::{ReduceOptions, ReductionTrace};
use crate::report::{self, Format, PosTagger, ReportMetadata, DEFAULT_BINS};
use crate::surrogate::SurrogateConfig;

pub const MODEL_URL_ENV: &str = "ROOTPROBE_MODEL_URL";

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rootprobe",
    version,
    about = "Explain QA models and find root questions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the surrogate for one example and write its coefficients.
    Explain(CommonArgs),
    /// Explain and reduce one example; writes its trace.
    Reduce(CommonArgs),
    /// Filter, explain and reduce a dataset, then aggregate a report.
    Batch(CommonArgs),
    /// Rebuild the report from stored traces without calling the model.
    Report(CommonArgs),
    /// Handshake with a model and validate one prediction.
    CheckModel(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// builtin | oracle:<keyword>:<target> | scripted:<path> | http:<url>
    #[arg(long)]
    pub model: Option<String>,
    /// SQuAD v1.1 JSON file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Only use the first N examples of the dataset.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Example id for explain/reduce (defaults to the first example).
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 25.0)]
    pub kernel_width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Concurrent request cap for http models.
    #[arg(long, default_value_t = 1)]
    pub max_inflight: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long, value_delimiter = ',')]
    pub format: Vec<String>,
    #[arg(long)]
    pub recompute_coefficients: bool,
    /// JSON object mapping words to part-of-speech tags.
    #[arg(long)]
    pub pos_tags: Option<PathBuf>,
    /// Number of histogram bins.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Trace directory for `report` (defaults to <out>/traces).
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

impl CommonArgs {
    fn model_spec(&self) -> String {
        resolve_model_spec(
            self.model.as_deref(),
            std::env::var(MODEL_URL_ENV).ok().as_deref(),
        )
    }

    fn surrogate(&self) -> SurrogateConfig {
        SurrogateConfig {
            n_samples: self.samples,
            kernel_width: self.kernel_width,
            ridge_alpha: self.alpha,
            seed: self.seed,
        }
    }

    fn formats(&self, default: &[Format]) -> Result<Vec<Format>> {
        if self.format.is_empty() {
            return Ok(default.to_vec());
        }
        let mut out: Vec<Format> = Vec::new();
        for f in &self.format {
            let f = f.parse()?;
            if !out.contains(&f) {
                out.push(f);
            }
        }
        Ok(out)
    }

    /// Everything that can be rejected before touching a model or a file.
    fn validate(&self, needs_data: bool) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        if self.max_inflight == 0 {
            return Err(Error::Config("--max-inflight must be at least 1".into()));
        }
        if self.limit == Some(0) {
            return Err(Error::Config("--limit must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::Config("--bins must be at least 1".into()));
        }
        if needs_data && self.data.is_none() {
            return Err(Error::Config("--data is required".into()));
        }
        self.surrogate().validate()?;
        self.formats(&[])?;
        Ok(())
    }
}

/// `--model` wins; otherwise the URL in the environment; otherwise builtin.
pub fn resolve_model_spec(flag: Option<&str>, env_url: Option<&str>) -> String {
    match (flag, env_url) {
        (Some(spec), _) => spec.to_string(),
        (None, Some(url)) if !url.trim().is_empty() => {
            let url = url.trim();
            if url.starts_with("http:") || url.starts_with("https:") {
                url.to_string()
            } else {
                format!("http:{url}")
            }
        }
        _ => "builtin".to_string(),
    }
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    run(&cli)
}

pub fn run(cli: &Cli) -> ExitCode {
    let (args, needs_data) = match &cli.command {
        Command::Explain(a) | Command::Reduce(a) | Command::Batch(a) => (a, true),
        Command::Report(a) | Command::CheckModel(a) => (a, false),
    };
    if let Err(e) = args.validate(needs_data) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let handle = match AnswererHandle::from_spec(&args.model_spec(), args.max_inflight) {
        Ok(h) => h,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let outcome = match &cli.command {
        Command::Explain(a) => cmd_explain(a, &handle),
        Command::Reduce(a) => cmd_reduce(a, &handle),
        Command::Batch(a) => cmd_batch(a, &handle),
        Command::Report(a) => cmd_report(a),
        Command::CheckModel(a) => cmd_check_model(a, &handle),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load_examples(args: &CommonArgs) -> Result<Vec<QaExample>> {
    let path = args.data.as_ref().expect("validated");
    let mut examples = load_squad(path)?;
    if let Some(limit) = args.limit {
        examples.truncate(limit);
    }
    Ok(examples)
}

fn pick_example(args: &CommonArgs) -> Result<QaExample> {
    let examples = load_examples(args)?;
    match &args.id {
        Some(id) => examples
            .into_iter()
            .find(|e| &e.id == id)
            .ok_or_else(|| Error::Config(format!("no example with id {id:?}"))),
        None => examples
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("dataset is empty".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// File name for an example id: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn trace_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    tool_version: &'a str,
    model: String,
    model_kind: String,
    dataset: Option<String>,
    surrogate: SurrogateConfig,
    workers: usize,
    max_inflight: usize,
    limit: Option<usize>,
    recompute_coefficients: bool,
    started_unix: u64,
    finished_unix: u64,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_run_record(
    args: &CommonArgs,
    command: &str,
    handle: Option<&AnswererHandle>,
    started: u64,
) -> Result<()> {
    let record = RunRecord {
        command,
        tool_version: env!("CARGO_PKG_VERSION"),
        model: args.model_spec(),
        model_kind: handle.map(|h| h.kind().to_string()).unwrap_or_default(),
        dataset: args.data.as_ref().map(|p| p.display().to_string()),
        surrogate: args.surrogate(),
        workers: args.workers,
        max_inflight: args.max_inflight,
        limit: args.limit,
        recompute_coefficients: args.recompute_coefficients,
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_json(&args.out.join("run.json"), &record)
}

#[derive(Serialize)]
struct ExplanationRecord<'a> {
    example_id: &'a str,
    question: &'a str,
    #[serde(flatten)]
    explanation: &'a crate::surrogate::Explanation,
}

fn cmd_explain(args: &CommonArgs, handle: &AnswererHandle) -> Result<()> {
    let started = unix_now();
    let example = pick_example(args)?;
    let explanation = explain_example(&example, handle, &args.surrogate())?;
    write_json(
        &args.out.join("explanation.json"),
        &ExplanationRecord {
            example_id: &example.id,
            question: &example.question,
            explanation: &explanation,
        },
    )?;
    if args.formats(&[Format::Json])?.contains(&Format::Svg) {
        let svg = report::coefficients_svg(&explanation.words, &explanation.coefficients);
        let path = args.out.join("coefficients.svg");
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    for (w, c) in explanation.words.iter().zip(&explanation.coefficients) {
        println!("{w}\t{c:.6}");
    }
    write_run_record(args, "explain", Some(handle), started)
}

fn cmd_reduce(args: &CommonArgs, handle: &AnswererHandle) -> Result<()> {
    let started = unix_now();
    let example = pick_example(args)?;
    let trace = analyze_example(&example, handle, &options(args))?;
    write_json(
        &args.out.join("traces").join(trace_file_name(&example.id)),
        &trace,
    )?;
    let root = trace.root()?;
    println!(
        "{}\troot={:?}\twords={}/{}\tremoved={:.3}",
        example.id,
        root.text(),
        root.word_count,
        root.n_original,
        root.percent_removed
    );
    write_run_record(args, "reduce", Some(handle), started)
}

fn options(args: &CommonArgs) -> AnalysisOptions {
    AnalysisOptions {
        surrogate: args.surrogate(),
        reduce: ReduceOptions {
            recompute_coefficients: args.recompute_coefficients,
        },
    }
}

fn tagger(args: &CommonArgs) -> Result<PosTagger> {
    match &args.pos_tags {
        Some(p) => PosTagger::load(p),
        None => Ok(PosTagger::Heuristic),
    }
}

/// Runs `analyze_example` over `examples` on up to `workers` threads and
/// returns results in input order.
pub fn analyze_all(
    examples: &[QaExample],
    handle: &AnswererHandle,
    options: &AnalysisOptions,
    workers: usize,
) -> Vec<Result<ReductionTrace>> {
    let workers = workers.clamp(1, examples.len().max(1));
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ReductionTrace>>>> =
        Mutex::new((0..examples.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= examples.len() {
                    break;
                }
                let r = analyze_example(&examples[i], handle, options);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if n.is_multiple_of(10) || n == examples.len() {
                    eprintln!("analyzed {n}/{}", examples.len());
                }
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn cmd_batch(args: &CommonArgs, handle: &AnswererHandle) -> Result<()> {
    let started = unix_now();
    let tagger = tagger(args)?;
    let examples = load_examples(args)?;
    let filtered = filter_correct(&examples, handle, args.workers);
    eprintln!(
        "kept {} of {} examples answered correctly",
        filtered.kept.len(),
        examples.len()
    );

    let results = analyze_all(&filtered.kept, handle, &options(args), args.workers);
    let mut skipped = filtered.dropped.clone();
    let mut traces = Vec::new();
    for (ex, r) in filtered.kept.iter().zip(results) {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                eprintln!("skipping {}: {e}", ex.id);
                skipped.push((ex.id.clone(), e.to_string()));
            }
        }
    }

    let trace_dir = args.out.join("traces");
    for t in &traces {
        write_json(&trace_dir.join(trace_file_name(&t.example_id)), t)?;
    }
    let index: Vec<&str> = traces.iter().map(|t| t.example_id.as_str()).collect();
    write_json(&trace_dir.join("index.json"), &index)?;

    let metadata = ReportMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: args.model_spec(),
        model_kind: handle.kind().to_string(),
        dataset: args.data.as_ref().map(|p| p.display().to_string()),
        surrogate: args.surrogate(),
        recompute_coefficients: args.recompute_coefficients,
        limit: args.limit,
        n_bins: args.bins,
        pos_tags: tagger.source().to_string(),
        examples_loaded: examples.len(),
        examples_kept: filtered.kept.len(),
        skipped,
    };
    let report = report::aggregate(&traces, &tagger, metadata)?;
    for f in args.formats(&[Format::Json, Format::Csv, Format::Svg])? {
        report::emit(&report, f, &args.out)?;
    }
    print_summary(&report);
    write_run_record(args, "batch", Some(handle), started)
}

fn read_traces(dir: &Path) -> Result<Vec<ReductionTrace>> {
    let index_path = dir.join("index.json");
    let files: Vec<PathBuf> = if index_path.exists() {
        let raw = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let ids: Vec<String> = serde_json::from_str(&raw)?;
        ids.iter().map(|id| dir.join(trace_file_name(id))).collect()
    } else {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
    };
    files
        .iter()
        .map(|p| {
            let raw = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&raw).map_err(|e| Error::Parse {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn cmd_report(args: &CommonArgs) -> Result<()> {
    let started = unix_now();
    let tagger = tagger(args)?;
    let dir = args
        .traces
        .clone()
        .unwrap_or_else(|| args.out.join("traces"));
    let traces = read_traces(&dir)?;
    // Carry the batch's metadata forward when it is there.
    let previous: Option<ReportMetadata> = std::fs::read_to_string(args.out.join("report.json"))
        .ok()
        .and_then(|raw| serde_json::from_str::<serde_json::Value>(&raw).ok())
        .and_then(|v| serde_json::from_value(v["metadata"].clone()).ok());
    let surrogate = traces
        .first()
        .map(|t| t.explanation.config)
        .unwrap_or_else(|| args.surrogate());
    let metadata = match previous {
        Some(m) => ReportMetadata {
            n_bins: args.bins,
            pos_tags: tagger.source().to_string(),
            ..m
        },
        None => ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model: "(stored traces)".into(),
            model_kind: String::new(),
            dataset: None,
            surrogate,
            recompute_coefficients: args.recompute_coefficients,
            limit: None,
            n_bins: args.bins,
            pos_tags: tagger.source().to_string(),
            examples_loaded: traces.len(),
            examples_kept: traces.len(),
            skipped: Vec::new(),
        },
    };
    let report = report::aggregate(&traces, &tagger, metadata)?;
    for f in args.formats(&[Format::Json, Format::Csv, Format::Svg])? {
        report::emit(&report, f, &args.out)?;
    }
    print_summary(&report);
    write_run_record(args, "report", None, started)
}

fn print_summary(report: &report::AnalysisReport) {
    println!("examples\t{}", report.per_example.len());
    for c in &report.categories.categories {
        println!("{}\t{}\t{:.3}", c.name, c.count, c.fraction);
    }
}

fn cmd_check_model(_args: &CommonArgs, handle: &AnswererHandle) -> Result<()> {
    handle.health()?;
    println!("health\tok\tkind={}", handle.kind());
    let p = handle.predict(PROBE_QUESTION, PROBE_CONTEXT)?;
    println!(
        "predict\tok\tanswer={:?}\ttokens={}\tmass={:.6}",
        p.answer_text,
        p.context_tokens.len(),
        p.start_distribution.iter().sum::<f64>()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_spec_precedence() {
        assert_eq!(
            resolve_model_spec(Some("builtin"), Some("http://x")),
            "builtin"
        );
        assert_eq!(resolve_model_spec(None, Some("http://x:1")), "http://x:1");
        assert_eq!(resolve_model_spec(None, Some("x:1")), "http:x:1");
        assert_eq!(resolve_model_spec(None, Some("  ")), "builtin");
        assert_eq!(resolve_model_spec(None, None), "builtin");
    }

    #[test]
    fn trace_names_are_filesystem_safe() {
        assert_eq!(trace_file_name("5733be28/x y"), "5733be28_x_y.json");
        assert_eq!(trace_file_name("a.b-c_d"), "a.b-c_d.json");
    }

    #[test]
    fn usage_errors_exit_with_one() {
        let code = |args: &[&str]| main_with_args(args.iter().copied());
        assert_eq!(code(&["rootprobe", "bogus"]), ExitCode::from(EXIT_USAGE));
        assert_eq!(code(&["rootprobe", "batch"]), ExitCode::from(EXIT_USAGE));
        assert_eq!(
            code(&["rootprobe", "batch", "--data", "x.json", "--workers", "0"]),
            ExitCode::from(EXIT_USAGE)
        );
        assert_eq!(
            code(&["rootprobe", "batch", "--data", "x.json", "--format", "pdf"]),
            ExitCode::from(EXIT_USAGE)
        );
        assert_eq!(
            code(&[
                "rootprobe",
                "explain",
                "--data",
                "x.json",
                "--model",
                "oracle:x"
            ]),
            ExitCode::from(EXIT_USAGE)
        );
        assert_eq!(
            code(&[
                "rootprobe",
                "batch",
                "--data",
                "x.json",
                "--kernel-width",
                "0"
            ]),
            ExitCode::from(EXIT_USAGE)
        );
    }

    #[test]
    fn missing_dataset_is_a_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = main_with_args([
            "rootprobe",
            "batch",
            "--data",
            dir.path().join("missing.json").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, ExitCode::from(EXIT_RUNTIME));
    }
}
