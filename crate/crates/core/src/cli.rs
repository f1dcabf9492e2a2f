//! Command-line interface: `run`, `sweep` and `check`.
//!
//! Exit codes: 0 when every oracle and replay passed, 1 when one failed,
//! 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bench::Benchmark;
use crate::check::{execute, run_checks, verdicts_json, CheckOptions, DropAllButFirst, RunSpec};
use crate::engine::{run_checked, Processors, RunConfig, RunError, Strategy, Trace, DEFAULT_MAX_STEPS};
use crate::program::{parse_program, parse_query};
use crate::report::{aggregate_rows, emit_csv, emit_json_summary, AggregateRow, OracleResult, RunKey, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "parchr", version, about = "Simulate parallel CHR execution and measure it")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one configuration.
    Run(RunArgs),
    /// Execute the Cartesian product of several settings.
    Sweep(SweepArgs),
    /// Evaluate the acceptance criteria.
    Check(CheckArgs),
}

/// `name[:variant]` of a bundled benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub benchmark: Benchmark,
    pub variant: Option<&'static str>,
}

impl FromStr for Example {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, variant) = match s.split_once(':') {
            Some((n, v)) => (n, Some(v)),
            None => (s, None),
        };
        let benchmark: Benchmark = name.parse()?;
        let variant = benchmark.variant(variant).map_err(|e| e.to_string())?;
        Ok(Example { benchmark, variant })
    }
}

/// A processor setting; `n` stands for the instance size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessorsArg {
    Fixed(Processors),
    Size,
}

impl ProcessorsArg {
    fn resolve(self, n: usize) -> Processors {
        match self {
            ProcessorsArg::Fixed(p) => p,
            ProcessorsArg::Size => Processors::Bounded(n.max(1)),
        }
    }
}

impl FromStr for ProcessorsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "n" {
            Ok(ProcessorsArg::Size)
        } else {
            s.parse().map(ProcessorsArg::Fixed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bundled benchmark, optionally with a variant (e.g. floyd:3).
    #[arg(long, value_name = "NAME[:VARIANT]", conflicts_with_all = ["program", "query"])]
    pub example: Option<Example>,
    /// Instance size for --example.
    #[arg(long, requires = "example")]
    pub size: Option<usize>,
    /// Rule file.
    #[arg(long, requires = "query")]
    pub program: Option<PathBuf>,
    /// Comma-separated goal constraints for --program.
    #[arg(long, requires = "program")]
    pub query: Option<String>,
    #[arg(long, default_value = "par")]
    pub strategy: Strategy,
    /// `unbounded`, a positive count, or `n` for the instance size.
    #[arg(long, default_value = "unbounded")]
    pub processors: ProcessorsArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Insert the goal in the given order.
    #[arg(long)]
    pub no_permute: bool,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Output file for the step CSV and/or JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Print the JSON summary instead of the text summary.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required = true, value_delimiter = ',', value_name = "NAME[:VARIANT]")]
    pub example: Vec<Example>,
    #[arg(long, required = true, value_delimiter = ',')]
    pub size: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "par,pars,pard,parr")]
    pub strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "unbounded")]
    pub processors: Vec<ProcessorsArg>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub no_permute: bool,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Output directory; one file per run plus aggregate.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
    /// Re-run configurations whose output files exist.
    #[arg(long)]
    pub force: bool,
    /// Print one JSON summary per run instead of text lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub json: bool,
    /// Only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<u8>,
    /// Number of seeds per configuration.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Negative control: replace every strategy by one that loses work.
    #[arg(long, hide = true)]
    pub broken_strategy: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Check(a) => Ok(cmd_check(&a)),
    };
    match result {
        Ok(passed) => i32::from(!passed),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Output files for `base` in the given format.
fn outputs(base: &Path, format: Format) -> Vec<(PathBuf, bool)> {
    match format {
        Format::Csv => vec![(base.to_path_buf(), false)],
        Format::Json => vec![(base.to_path_buf(), true)],
        Format::Both => vec![(base.with_extension("csv"), false), (base.with_extension("json"), true)],
    }
}

fn write_outputs(files: &[(PathBuf, bool)], trace: &Trace, summary: &RunSummary) -> std::io::Result<()> {
    for (path, json) in files {
        let text = if *json { emit_json_summary(summary) } else { emit_csv(trace) };
        write_atomic(path, &text)?;
    }
    Ok(())
}

fn print_summary(summary: &RunSummary, final_store: Option<&[crate::term::Term]>, json: bool) {
    if json {
        print!("{}", emit_json_summary(summary));
        return;
    }
    let k = &summary.key;
    let variant = k.variant.as_deref().map(|v| format!(":{v}")).unwrap_or_default();
    println!(
        "example={}{variant} n={} strategy={} processors={} seed={}",
        k.example, k.n, k.strategy, k.processors, k.seed
    );
    println!(
        "counted_steps={} total_steps={} mean_applicable={} mean_applicable_raw={} mean_applied={} max_applied={}",
        summary.counted_steps,
        summary.total_steps,
        summary.mean_applicable(),
        summary.mean_applicable_raw(),
        summary.mean_applied(),
        summary.max_applied
    );
    println!(
        "final_store_size={} validated={} oracle={}",
        summary.final_store_size, summary.validated, summary.oracle_result
    );
    if let Some(store) = final_store {
        let terms: Vec<String> = store.iter().map(ToString::to_string).collect();
        println!("final store: {}", terms.join(", "));
    }
}

fn run_error(e: RunError) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

pub fn cmd_run(a: &RunArgs) -> Result<bool, CliError> {
    let files = a.out.as_ref().map(|o| outputs(o, a.format)).unwrap_or_default();
    if !a.force {
        if let Some((p, _)) = files.iter().find(|(p, _)| p.exists()) {
            return Err(CliError::Usage(format!("{} exists (use --force)", p.display())));
        }
    }
    let (trace, summary) = match (&a.example, &a.program, &a.query) {
        (Some(ex), None, None) => {
            let n = a.size.ok_or_else(|| CliError::Usage("--example needs --size".into()))?;
            let spec = RunSpec {
                benchmark: ex.benchmark,
                variant: ex.variant,
                n,
                strategy: a.strategy,
                processors: a.processors.resolve(n),
                seed: a.seed,
            };
            ex.benchmark
                .generate(n, ex.variant, a.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let max_steps = a.max_steps.unwrap_or(ex.benchmark.default_max_steps());
            let done = execute(&spec, !a.no_permute, max_steps, None)
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            (done.trace, done.summary)
        }
        (None, Some(path), Some(query)) => {
            let source = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let program = parse_program(&source).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let goal = parse_query(query).map_err(|e| CliError::Usage(format!("query: {e}")))?;
            let n = goal.len();
            let config = RunConfig::new(Arc::new(program), goal)
                .strategy(a.strategy)
                .processors(a.processors.resolve(n))
                .seed(a.seed)
                .permute_query(!a.no_permute)
                .max_steps(a.max_steps.unwrap_or(DEFAULT_MAX_STEPS));
            let (trace, replay) = run_checked(&config).map_err(run_error)?;
            if let Err(e) = &replay {
                eprintln!("replay: {e}");
            }
            let key = RunKey {
                example: path
                    .file_stem()
                    .map_or_else(|| "program".into(), |s| s.to_string_lossy().into_owned()),
                variant: None,
                n,
                strategy: a.strategy,
                processors: config.processors,
                seed: a.seed,
            };
            let summary = RunSummary::new(key, &trace, replay.is_ok(), OracleResult::Skipped);
            (trace, summary)
        }
        _ => return Err(CliError::Usage("give either --example and --size or --program and --query".into())),
    };
    write_outputs(&files, &trace, &summary)?;
    print_summary(&summary, Some(&trace.final_store), a.json);
    Ok(summary.passed())
}

/// A finished sweep entry: row, pass flag and an optional message.
type SweepRow = (RunSpec, AggregateRow, bool, Option<String>);

pub fn cmd_sweep(a: &SweepArgs) -> Result<bool, CliError> {
    let mut specs = Vec::new();
    for ex in &a.example {
        for &n in &a.size {
            for &seed in &a.seed {
                ex.benchmark
                    .generate(n, ex.variant, seed)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                for &strategy in &a.strategy {
                    for &p in &a.processors {
                        specs.push(RunSpec {
                            benchmark: ex.benchmark,
                            variant: ex.variant,
                            n,
                            strategy,
                            processors: p.resolve(n),
                            seed,
                        });
                    }
                }
            }
        }
    }
    specs.sort();
    specs.dedup();
    if specs.is_empty() {
        return Err(CliError::Usage("the sweep is empty".into()));
    }
    fs::create_dir_all(&a.out)?;

    let results: Vec<Result<SweepRow, CliError>> = specs
        .par_iter()
        .map(|spec| {
            let files = outputs(&a.out.join(spec.key().file_stem()), a.format);
            let json_path = files.iter().find(|(_, j)| *j).map(|(p, _)| p.clone());
            if !a.force && files.iter().all(|(p, _)| p.exists()) {
                if let Some(p) = &json_path {
                    let text = fs::read_to_string(p)?;
                    if let Ok(row) = AggregateRow::from_json(&text) {
                        let passed = row.values[14] == "true" && !row.values[15].starts_with("fail");
                        return Ok((*spec, row, passed, None));
                    }
                }
            }
            let max_steps = a.max_steps.unwrap_or(spec.benchmark.default_max_steps());
            let done = match execute(spec, !a.no_permute, max_steps, None) {
                Ok(d) => d,
                Err(e) => {
                    let failed = RunSummary {
                        key: spec.key(),
                        permute_query: !a.no_permute,
                        counted_steps: 0,
                        total_steps: 0,
                        applicable_total: 0,
                        applicable_raw_total: 0,
                        applied_total: 0,
                        max_applicable_raw: 0,
                        max_applied: 0,
                        final_store_size: 0,
                        validated: false,
                        oracle_result: OracleResult::Fail(e.clone()),
                    };
                    return Ok((*spec, AggregateRow::from(&failed), false, Some(e)));
                }
            };
            let fresh = a.force || !files.iter().all(|(p, _)| p.exists());
            if fresh {
                write_outputs(&files, &done.trace, &done.summary)?;
            }
            let json = a.json.then(|| emit_json_summary(&done.summary));
            Ok((*spec, AggregateRow::from(&done.summary), done.summary.passed(), json))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut all_passed = true;
    for r in results {
        let (spec, row, passed, extra) = r?;
        all_passed &= passed;
        match (a.json, extra) {
            (true, Some(json)) => print!("{json}"),
            (_, extra) => {
                let status = if passed { "ok" } else { "FAILED" };
                let note = extra.filter(|_| !passed).map(|e| format!(" ({e})")).unwrap_or_default();
                println!("{status} {} counted_steps={}{note}", spec.key().file_stem(), row.values[6]);
            }
        }
        rows.push(row);
    }
    write_atomic(&a.out.join("aggregate.csv"), &aggregate_rows(rows))?;
    Ok(all_passed)
}

pub fn cmd_check(a: &CheckArgs) -> bool {
    let opts = CheckOptions {
        seeds: a.seeds,
        primes_seeds: a.seeds.max(10),
        only: (!a.criteria.is_empty()).then(|| a.criteria.clone()),
        scheduler: if a.broken_strategy {
            Some(Arc::new(DropAllButFirst))
        } else {
            None
        },
        ..CheckOptions::default()
    };
    let verdicts = run_checks(&opts);
    if a.json {
        print!("{}", verdicts_json(&verdicts));
    } else {
        for v in &verdicts {
            println!("{v}");
        }
    }
    verdicts.iter().all(|v| v.passed)
}
