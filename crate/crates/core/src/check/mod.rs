//! The acceptance matrix.
//!
//! Every criterion is evaluated over a set of benchmark runs. Each run is
//! executed twice (for the determinism criterion) and replayed online.

pub mod brute;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use brute::{brute_force_matchings, matcher_agrees, random_store};

use crate::bench::{Benchmark, Instance};
use crate::engine::{run_checked_with, Processors, RunConfig, RunError, Scheduler, Strategy, Trace};
use crate::report::{emit_csv, emit_json_summary, OracleResult, RunKey, RunSummary};

/// One benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RunSpec {
    pub benchmark: Benchmark,
    pub variant: Option<&'static str>,
    pub n: usize,
    pub strategy: Strategy,
    pub processors: Processors,
    pub seed: u64,
}

impl RunSpec {
    pub fn key(&self) -> RunKey {
        RunKey {
            example: self.benchmark.name().to_string(),
            variant: self.variant.map(str::to_string),
            n: self.n,
            strategy: self.strategy,
            processors: self.processors,
            seed: self.seed,
        }
    }
}

/// A finished run with its replay and oracle verdicts.
#[derive(Debug)]
pub struct Executed {
    pub trace: Trace,
    pub summary: RunSummary,
    pub validation: Result<(), String>,
}

/// Generates, runs, replays and checks one benchmark configuration.
/// `scheduler` replaces the spec's strategy when given.
pub fn execute(
    spec: &RunSpec,
    permute_query: bool,
    max_steps: usize,
    scheduler: Option<&dyn Scheduler>,
) -> Result<Executed, String> {
    let inst = Instance::new(spec.benchmark, spec.variant, spec.n, spec.seed).map_err(|e| e.to_string())?;
    let config = RunConfig::new(inst.program.clone(), inst.goal.clone())
        .strategy(spec.strategy)
        .processors(spec.processors)
        .seed(spec.seed)
        .permute_query(permute_query)
        .max_steps(max_steps);
    let (trace, replay) = run_checked_with(&config, scheduler.unwrap_or(&spec.strategy)).map_err(|e| match e {
        RunError::StepLimitExceeded { limit, .. } => format!("step limit {limit} reached"),
        other => other.to_string(),
    })?;
    let oracle = OracleResult::from(inst.oracle(&trace.final_store));
    let validation = replay.map_err(|e| e.to_string());
    let summary = RunSummary::new(spec.key(), &trace, validation.is_ok(), oracle);
    Ok(Executed {
        trace,
        summary,
        validation,
    })
}

/// What the criteria need to know about a run.
#[derive(Debug, Clone)]
struct Record {
    summary: RunSummary,
    validated: bool,
    /// Every step applied all applicable instances.
    exhaustive: bool,
    /// Two executions gave byte-identical CSV and JSON.
    deterministic: bool,
}

impl Record {
    fn oracle_ok(&self) -> bool {
        self.summary.oracle_result.passed()
    }

    fn steps(&self) -> usize {
        self.summary.counted_steps
    }
}

fn record(spec: &RunSpec, scheduler: Option<&dyn Scheduler>) -> Result<Record, String> {
    let max_steps = spec.benchmark.default_max_steps();
    let first = execute(spec, true, max_steps, scheduler)?;
    let rendered = |e: &Executed| (emit_csv(&e.trace), emit_json_summary(&e.summary));
    let once = rendered(&first);
    let exhaustive = first.trace.steps.iter().all(|s| s.applied == s.applicable);
    let validated = first.validation.is_ok();
    let summary = first.summary;
    drop(first.trace);
    let second = execute(spec, true, max_steps, scheduler)?;
    Ok(Record {
        deterministic: rendered(&second) == once,
        summary,
        validated,
        exhaustive,
    })
}

/// Verdict on one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:>2} {}: {}", self.id, self.title, self.detail)
    }
}

pub const TITLES: [&str; 13] = [
    "min sequential steps",
    "min unbounded",
    "primes",
    "merge sort steps",
    "gcd correctness",
    "fibonacci",
    "sat",
    "floyd-warshall",
    "blocks world",
    "union-find",
    "serializability",
    "matcher oracle",
    "determinism",
];

#[derive(Clone)]
pub struct CheckOptions {
    /// Seeds `0..seeds` for every run criterion.
    pub seeds: u64,
    /// Seeds for bounded primes.
    pub primes_seeds: u64,
    /// Random stores per program for the matcher oracle.
    pub matcher_stores: usize,
    /// Criteria to evaluate; all when `None`.
    pub only: Option<Vec<u8>>,
    /// Replaces every strategy (negative controls).
    pub scheduler: Option<Arc<dyn Scheduler + Send>>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seeds: 5,
            primes_seeds: 10,
            matcher_stores: 200,
            only: None,
            scheduler: None,
        }
    }
}

impl CheckOptions {
    fn wants(&self, id: u8) -> bool {
        self.only.as_ref().is_none_or(|o| o.contains(&id))
    }
}

fn bounded(k: usize) -> Processors {
    Processors::Bounded(k.max(1))
}

/// Unbounded, one processor and `n` processors.
fn three(n: usize) -> Vec<Processors> {
    let mut v = vec![Processors::Unbounded, bounded(1), bounded(n)];
    v.dedup();
    v
}

/// The runs behind criteria 1 to 10, by criterion.
fn matrix(opts: &CheckOptions) -> BTreeMap<u8, Vec<RunSpec>> {
    use Benchmark::*;
    let seeds = 0..opts.seeds;
    let grid = |b: Benchmark, v: Option<&'static str>, n: usize, procs: &[Processors], seeds: std::ops::Range<u64>| {
        let mut out = Vec::new();
        for s in Strategy::ALL {
            for &p in procs {
                for seed in seeds.clone() {
                    out.push(RunSpec {
                        benchmark: b,
                        variant: v,
                        n,
                        strategy: s,
                        processors: p,
                        seed,
                    });
                }
            }
        }
        out
    };
    let mut m = BTreeMap::new();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for n in [5, 7, 30] {
        c1.extend(grid(Min, None, n, &[bounded(1)], seeds.clone()));
        c2.extend(grid(Min, None, n, &[Processors::Unbounded], seeds.clone()));
    }
    m.insert(1, c1);
    m.insert(2, c2);
    let mut c3 = grid(Primes, None, 30, &[Processors::Unbounded], seeds.clone());
    c3.extend(grid(Primes, None, 30, &[bounded(30)], 0..opts.primes_seeds));
    m.insert(3, c3);
    m.insert(4, grid(Msort, None, 30, &[Processors::Unbounded, bounded(30)], seeds.clone()));
    let mut c5 = Vec::new();
    for b in [Gcd2, Gcd] {
        for n in [30, 7] {
            c5.extend(grid(b, None, n, &three(n), seeds.clone()));
        }
    }
    m.insert(5, c5);
    let mut c6 = Vec::new();
    for n in [0, 1, 5, 7] {
        c6.extend(grid(Fib, None, n, &three(n), seeds.clone()));
    }
    m.insert(6, c6);
    let mut c7 = Vec::new();
    for n in [3, 5] {
        c7.extend(grid(Sat, None, n, &three(n), seeds.clone()));
    }
    m.insert(7, c7);
    let mut c8 = Vec::new();
    for v in ["2", "3"] {
        c8.extend(grid(Floyd, Some(v), 7, &three(7), seeds.clone()));
    }
    m.insert(8, c8);
    let mut c9 = Vec::new();
    for n in [5, 30] {
        for v in ["1", "2"] {
            c9.extend(grid(Blocks, Some(v), n, &three(n), seeds.clone()));
        }
    }
    m.insert(9, c9);
    let mut c10 = Vec::new();
    for n in [5, 15] {
        for v in ["dense", "matching"] {
            let procs = [Processors::Unbounded, bounded(1), bounded(2 * n)];
            c10.extend(grid(Uf, Some(v), n, &procs, seeds.clone()));
        }
    }
    m.insert(10, c10);
    m
}

type Records = BTreeMap<RunSpec, Result<Record, String>>;

/// Collects failures and renders a short diagnostic.
struct Tally {
    runs: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            runs: 0,
            failures: Vec::new(),
        }
    }

    fn fail(&mut self, spec: &RunSpec, why: impl fmt::Display) {
        self.failures.push(format!("{}: {why}", spec.key().file_stem()));
    }

    /// Looks a run up, recording an execution error as a failure.
    fn get<'r>(&mut self, records: &'r Records, spec: &RunSpec) -> Option<&'r Record> {
        self.runs += 1;
        match &records[spec] {
            Ok(r) => Some(r),
            Err(e) => {
                self.fail(spec, e);
                None
            }
        }
    }

    fn verdict(self, id: u8, ok_detail: String) -> Verdict {
        let passed = self.failures.is_empty();
        let detail = if passed {
            format!("{} runs; {ok_detail}", self.runs)
        } else {
            let shown: Vec<&str> = self.failures.iter().take(4).map(String::as_str).collect();
            let more = self.failures.len().saturating_sub(shown.len());
            let tail = if more > 0 { format!(" (+{more} more)") } else { String::new() };
            format!(
                "{} of {} runs failed; {ok_detail}; {}{tail}",
                self.failures.len(),
                self.runs,
                shown.join("; ")
            )
        };
        Verdict {
            id,
            title: TITLES[id as usize - 1],
            passed,
            detail,
        }
    }
}

/// `lo..=hi` of an iterator of step counts, per strategy.
fn ranges<'a>(runs: impl Iterator<Item = (&'a RunSpec, usize)>) -> String {
    let mut by: BTreeMap<Strategy, (usize, usize)> = BTreeMap::new();
    for (spec, v) in runs {
        let e = by.entry(spec.strategy).or_insert((v, v));
        e.0 = e.0.min(v);
        e.1 = e.1.max(v);
    }
    let parts: Vec<String> = by.iter().map(|(s, (lo, hi))| format!("{s} {lo}..{hi}")).collect();
    parts.join(", ")
}

fn evaluate(id: u8, specs: &[RunSpec], records: &Records) -> Verdict {
    let mut t = Tally::new();
    let oracle = |t: &mut Tally, spec: &RunSpec, r: &Record| {
        if !r.oracle_ok() {
            t.fail(spec, &r.summary.oracle_result);
        }
    };
    let steps_of = |pred: &dyn Fn(&RunSpec) -> bool| -> Vec<(&RunSpec, usize)> {
        specs
            .iter()
            .filter(|s| pred(s))
            .filter_map(|s| records[s].as_ref().ok().map(|r| (s, r.steps())))
            .collect()
    };
    let detail = match id {
        1 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    if r.steps() != s.n - 1 {
                        t.fail(s, format!("{} steps, expected {}", r.steps(), s.n - 1));
                    }
                }
            }
            "counted_steps = n - 1".to_string()
        }
        2 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    if r.steps() != 1 {
                        t.fail(s, format!("{} steps", r.steps()));
                    }
                }
            }
            "one step, smallest value survives".to_string()
        }
        3 => {
            let mut bounded_steps = Vec::new();
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    match s.processors {
                        Processors::Unbounded if r.steps() != 1 => t.fail(s, format!("{} steps", r.steps())),
                        Processors::Bounded(_) => {
                            bounded_steps.push(r.steps());
                            if r.steps() > 3 {
                                t.fail(s, format!("{} steps", r.steps()));
                            }
                        }
                        _ => {}
                    }
                }
            }
            let sum: usize = bounded_steps.iter().sum();
            let count = bounded_steps.len().max(1);
            // mean within 2 +- 1
            if sum < count || sum > 3 * count {
                t.failures.push(format!("bounded mean {sum}/{count} outside 1..3"));
            }
            format!(
                "unbounded 1 step; bounded steps {} (mean {:.2})",
                ranges(steps_of(&|s| s.processors != Processors::Unbounded).into_iter()),
                sum as f64 / count as f64
            )
        }
        4 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    let (lo, hi) = match s.processors {
                        Processors::Unbounded => (24, 30),
                        Processors::Bounded(_) => (35, 55),
                    };
                    if !(lo..=hi).contains(&r.steps()) {
                        t.fail(s, format!("{} steps outside {lo}..{hi}", r.steps()));
                    }
                }
            }
            format!(
                "unbounded: {}; bounded(30): {}",
                ranges(steps_of(&|s| s.processors == Processors::Unbounded).into_iter()),
                ranges(steps_of(&|s| s.processors != Processors::Unbounded).into_iter())
            )
        }
        5 => {
            let (mut lo, mut hi) = (usize::MAX, 0);
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    if s.benchmark == Benchmark::Gcd && s.n == 30 {
                        let m = r.summary.max_applicable_raw;
                        lo = lo.min(m);
                        hi = hi.max(m);
                        if !(400..=2000).contains(&m) {
                            t.fail(s, format!("max applicable_raw {m} outside 400..2000"));
                        }
                    }
                }
            }
            format!("gcd n=30 max applicable_raw {lo}..{hi}")
        }
        6 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    if s.processors == Processors::Unbounded && r.steps() > 2 * s.n + 2 {
                        t.fail(s, format!("{} steps > 2n+2", r.steps()));
                    }
                }
            }
            format!(
                "unbounded steps {}",
                ranges(steps_of(&|s| s.processors == Processors::Unbounded).into_iter())
            )
        }
        7 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    if s.processors == Processors::Unbounded && !r.exhaustive {
                        t.fail(s, "a step applied fewer instances than applicable");
                    }
                }
            }
            "2^n assignments, evaluator agrees, unbounded steps exhaustive".to_string()
        }
        8 => {
            for s in specs {
                if let Some(r) = t.get(records, s) {
                    oracle(&mut t, s, r);
                    if s.processors == Processors::Unbounded && r.steps() > 10 {
                        t.fail(s, format!("{} steps > 10", r.steps()));
                    }
                }
            }
            format!(
                "unbounded steps {}",
                ranges(steps_of(&|s| s.processors == Processors::Unbounded).into_iter())
            )
        }
        9 | 10 => {
            let paired = |s: &RunSpec| match (id, s.processors) {
                (9, Processors::Bounded(k)) => k == s.n.max(1),
                (10, Processors::Bounded(k)) => k == 2 * s.n,
                _ => false,
            };
            let mut worst = 0usize;
            for s in specs {
                let Some(r) = t.get(records, s) else { continue };
                oracle(&mut t, s, r);
                if !paired(s) {
                    continue;
                }
                let unbounded = RunSpec {
                    processors: Processors::Unbounded,
                    ..*s
                };
                let Ok(u) = &records[&unbounded] else { continue };
                let (b, u) = (r.steps(), u.steps());
                let ok = if id == 9 {
                    worst = worst.max(b.max(u) * 100 / b.min(u).max(1));
                    b.max(u) <= 2 * b.min(u).max(1)
                } else {
                    worst = worst.max(b.abs_diff(u));
                    b.abs_diff(u) <= 2
                };
                if !ok {
                    t.fail(s, format!("bounded {b} vs unbounded {u} steps"));
                }
            }
            if id == 9 {
                format!("largest bounded/unbounded ratio {}.{:02}", worst / 100, worst % 100)
            } else {
                format!("largest bounded/unbounded difference {worst}")
            }
        }
        _ => unreachable!("criterion {id} has no runs"),
    };
    t.verdict(id, detail)
}

fn summarize_all(id: u8, records: &Records, check: impl Fn(&Record) -> Result<(), String>, ok: &str) -> Verdict {
    let mut t = Tally::new();
    for spec in records.keys() {
        if let Some(r) = t.get(records, spec) {
            if let Err(e) = check(r) {
                t.fail(spec, e);
            }
        }
    }
    t.verdict(id, ok.to_string())
}

/// Evaluates the selected criteria.
pub fn run_checks(opts: &CheckOptions) -> Vec<Verdict> {
    let all = matrix(opts);
    let needs_runs = (1..=11).chain([13]).any(|id| opts.wants(id));
    let mut specs: Vec<RunSpec> = all
        .iter()
        .filter(|(id, _)| needs_runs && (opts.wants(**id) || opts.wants(11) || opts.wants(13)))
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    specs.sort();
    specs.dedup();
    // long runs first so they overlap with the short ones
    specs.sort_by_key(|s| (s.benchmark != Benchmark::Gcd2 || s.n < 30, *s));
    let scheduler = opts.scheduler.clone();
    let records: Records = specs
        .par_iter()
        .map(|s| {
            let sched: Option<&dyn Scheduler> = match &scheduler {
                Some(a) => Some(&**a),
                None => None,
            };
            (*s, record(s, sched))
        })
        .collect();

    let mut verdicts = Vec::new();
    for id in 1..=13u8 {
        if !opts.wants(id) {
            continue;
        }
        let v = match id {
            1..=10 => evaluate(id, &all[&id], &records),
            11 => summarize_all(
                11,
                &records,
                |r| if r.validated { Ok(()) } else { Err("replay rejected the trace".into()) },
                "every trace replays as single rule applications",
            ),
            12 => matcher_verdict(opts.matcher_stores),
            _ => summarize_all(
                13,
                &records,
                |r| if r.deterministic { Ok(()) } else { Err("repeated run differs".into()) },
                "repeated runs give identical CSV and JSON",
            ),
        };
        verdicts.push(v);
    }
    verdicts
}

fn matcher_verdict(stores: usize) -> Verdict {
    let mut failures = Vec::new();
    let mut programs = 0;
    for b in Benchmark::ALL {
        if b == Benchmark::Gcd2 {
            continue;
        }
        programs += 1;
        if let Err(e) = matcher_agrees(&b.program(), stores, b as u64) {
            failures.push(format!("{b}: {e}"));
        }
    }
    let passed = failures.is_empty();
    Verdict {
        id: 12,
        title: TITLES[11],
        passed,
        detail: if passed {
            format!("{stores} random stores for each of {programs} programs agree")
        } else {
            failures.join("; ")
        },
    }
}

/// Machine-readable rendering of verdicts.
pub fn verdicts_json(verdicts: &[Verdict]) -> String {
    let items: Vec<serde_json::Value> = verdicts
        .iter()
        .map(|v| {
            serde_json::json!({
                "id": v.id,
                "title": v.title,
                "passed": v.passed,
                "detail": v.detail,
            })
        })
        .collect();
    let passed = verdicts.iter().all(|v| v.passed);
    let doc = serde_json::json!({ "passed": passed, "criteria": items });
    serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
}

/// Deliberately broken scheduler: keeps only the first entry of the
/// ordered conflict set and silently drops the rest.
pub struct DropAllButFirst;

impl Scheduler for DropAllButFirst {
    fn order(
        &self,
        mut entries: Vec<crate::matcher::MatchInstance>,
        _rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Vec<crate::matcher::MatchInstance> {
        entries.truncate(1);
        entries
    }
}
