//! Per-step CSV traces, JSON run summaries and the aggregate CSV matrix.

use std::fmt;
use std::fmt::Write as _;

use crate::engine::{Processors, Strategy, Trace};

pub const STEP_CSV_HEADER: &str = "step,applicable,applicable_raw,applied,store_size,gc";

pub const AGGREGATE_HEADER: [&str; 17] = [
    "example",
    "variant",
    "n",
    "strategy",
    "processors",
    "seed",
    "counted_steps",
    "total_steps",
    "mean_applicable",
    "mean_applicable_raw",
    "mean_applied",
    "max_applicable_raw",
    "max_applied",
    "final_store_size",
    "validated",
    "oracle_result",
    "permute_query",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepMetrics {
    /// 1-based.
    pub step: usize,
    /// Alive conflict-set entries after pruning.
    pub applicable: usize,
    /// Conflict-set entries before pruning.
    pub applicable_raw: usize,
    pub applied: usize,
    /// Alive constraints after the step's insertions.
    pub store_size: usize,
    pub gc: bool,
}

/// Identifies one run of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub example: String,
    pub variant: Option<String>,
    pub n: usize,
    pub strategy: Strategy,
    pub processors: Processors,
    pub seed: u64,
}

impl RunKey {
    /// `<example>[-variant]_<n>_<strategy>_<processors>_<seed>`
    pub fn file_stem(&self) -> String {
        let mut s = self.example.clone();
        if let Some(v) = &self.variant {
            s.push('-');
            s.push_str(v);
        }
        format!("{s}_{}_{}_{}_{}", self.n, self.strategy, self.processors, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleResult {
    Pass,
    Fail(String),
    /// No oracle exists (user-supplied program).
    Skipped,
}

impl OracleResult {
    pub fn passed(&self) -> bool {
        !matches!(self, OracleResult::Fail(_))
    }
}

impl fmt::Display for OracleResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleResult::Pass => f.write_str("pass"),
            OracleResult::Fail(d) => write!(f, "fail:{d}"),
            OracleResult::Skipped => f.write_str("skipped"),
        }
    }
}

impl From<Result<(), String>> for OracleResult {
    fn from(r: Result<(), String>) -> Self {
        match r {
            Ok(()) => OracleResult::Pass,
            Err(d) => OracleResult::Fail(d),
        }
    }
}

/// A value `numer / denom` printed with two decimals, rounded half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mean {
    pub numer: u64,
    pub denom: u64,
}

impl fmt::Display for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom == 0 {
            return f.write_str("0.00");
        }
        let hundredths =
            (200 * self.numer as u128 + self.denom as u128) / (2 * self.denom as u128);
        write!(f, "{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub key: RunKey,
    pub permute_query: bool,
    pub counted_steps: usize,
    pub total_steps: usize,
    pub applicable_total: u64,
    pub applicable_raw_total: u64,
    pub applied_total: u64,
    pub max_applicable_raw: usize,
    pub max_applied: usize,
    pub final_store_size: usize,
    pub validated: bool,
    pub oracle_result: OracleResult,
}

impl RunSummary {
    pub fn new(key: RunKey, trace: &Trace, validated: bool, oracle_result: OracleResult) -> Self {
        let counted = trace.steps.iter().filter(|s| !s.gc);
        let sum = |f: fn(&StepMetrics) -> usize| counted.clone().map(|s| f(s) as u64).sum();
        RunSummary {
            key,
            permute_query: trace.config.permute_query,
            counted_steps: trace.counted_steps(),
            total_steps: trace.total_steps(),
            applicable_total: sum(|s| s.applicable),
            applicable_raw_total: sum(|s| s.applicable_raw),
            applied_total: sum(|s| s.applied),
            max_applicable_raw: trace.steps.iter().map(|s| s.applicable_raw).max().unwrap_or(0),
            max_applied: trace.steps.iter().map(|s| s.applied).max().unwrap_or(0),
            final_store_size: trace.final_store.len(),
            validated,
            oracle_result,
        }
    }

    fn mean(&self, total: u64) -> Mean {
        Mean {
            numer: total,
            denom: self.counted_steps as u64,
        }
    }

    pub fn mean_applicable(&self) -> Mean {
        self.mean(self.applicable_total)
    }

    pub fn mean_applicable_raw(&self) -> Mean {
        self.mean(self.applicable_raw_total)
    }

    pub fn mean_applied(&self) -> Mean {
        self.mean(self.applied_total)
    }

    pub fn passed(&self) -> bool {
        self.validated && self.oracle_result.passed()
    }
}

/// Renders the per-step metrics of a trace.
pub fn emit_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(32 * (trace.steps.len() + 1));
    out.push_str(STEP_CSV_HEADER);
    out.push('\n');
    for s in &trace.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.step,
            s.applicable,
            s.applicable_raw,
            s.applied,
            s.store_size,
            u8::from(s.gc)
        );
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("summary JSON: {0}")]
    Json(String),
}

/// Reads back the output of [`emit_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<StepMetrics>, ReportError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != STEP_CSV_HEADER {
        return Err(ReportError::Header(header));
    }
    let mut steps = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<usize, ReportError> {
            rec[i].parse().map_err(|_| ReportError::Row {
                line,
                message: format!("bad integer `{}`", &rec[i]),
            })
        };
        let gc = match &rec[5] {
            "0" => false,
            "1" => true,
            other => {
                return Err(ReportError::Row {
                    line,
                    message: format!("bad gc flag `{other}`"),
                })
            }
        };
        steps.push(StepMetrics {
            step: field(0)?,
            applicable: field(1)?,
            applicable_raw: field(2)?,
            applied: field(3)?,
            store_size: field(4)?,
            gc,
        });
    }
    Ok(steps)
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Renders a summary as a JSON object with a fixed key order.
pub fn emit_json_summary(summary: &RunSummary) -> String {
    let k = &summary.key;
    let variant = k.variant.as_deref().map_or("null".to_string(), json_str);
    let fields: Vec<(&str, String)> = vec![
        ("example", json_str(&k.example)),
        ("variant", variant),
        ("n", k.n.to_string()),
        ("strategy", json_str(k.strategy.name())),
        ("processors", json_str(&k.processors.to_string())),
        ("seed", k.seed.to_string()),
        ("permute_query", summary.permute_query.to_string()),
        ("counted_steps", summary.counted_steps.to_string()),
        ("total_steps", summary.total_steps.to_string()),
        ("mean_applicable", summary.mean_applicable().to_string()),
        ("mean_applicable_raw", summary.mean_applicable_raw().to_string()),
        ("mean_applied", summary.mean_applied().to_string()),
        ("max_applicable_raw", summary.max_applicable_raw.to_string()),
        ("max_applied", summary.max_applied.to_string()),
        ("final_store_size", summary.final_store_size.to_string()),
        ("validated", summary.validated.to_string()),
        ("oracle_result", json_str(&summary.oracle_result.to_string())),
    ];
    let body: Vec<String> = fields
        .into_iter()
        .map(|(key, value)| format!("  \"{key}\": {value}"))
        .collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

/// One row of the aggregate matrix, already rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateRow {
    pub key: RunKey,
    /// Values in [`AGGREGATE_HEADER`] order.
    pub values: Vec<String>,
}

impl From<&RunSummary> for AggregateRow {
    fn from(s: &RunSummary) -> Self {
        let k = &s.key;
        AggregateRow {
            key: k.clone(),
            values: vec![
                k.example.clone(),
                k.variant.clone().unwrap_or_default(),
                k.n.to_string(),
                k.strategy.to_string(),
                k.processors.to_string(),
                k.seed.to_string(),
                s.counted_steps.to_string(),
                s.total_steps.to_string(),
                s.mean_applicable().to_string(),
                s.mean_applicable_raw().to_string(),
                s.mean_applied().to_string(),
                s.max_applicable_raw.to_string(),
                s.max_applied.to_string(),
                s.final_store_size.to_string(),
                s.validated.to_string(),
                s.oracle_result.to_string(),
                s.permute_query.to_string(),
            ],
        }
    }
}

impl AggregateRow {
    /// Rebuilds a row from the output of [`emit_json_summary`].
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let bad = |m: &str| ReportError::Json(m.to_string());
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))?;
        let field = |name: &str| doc.get(name).ok_or_else(|| bad(&format!("missing `{name}`")));
        let text_of = |name: &str| -> Result<String, ReportError> {
            let v = field(name)?;
            Ok(match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                serde_json::Value::Number(n) if name.starts_with("mean_") => {
                    format!("{:.2}", n.as_f64().ok_or_else(|| bad("mean"))?)
                }
                other => other.to_string(),
            })
        };
        let variant = text_of("variant")?;
        let key = RunKey {
            example: text_of("example")?,
            variant: (!variant.is_empty()).then_some(variant),
            n: text_of("n")?.parse().map_err(|_| bad("n"))?,
            strategy: text_of("strategy")?.parse().map_err(|e: String| bad(&e))?,
            processors: text_of("processors")?.parse().map_err(|e: String| bad(&e))?,
            seed: text_of("seed")?.parse().map_err(|_| bad("seed"))?,
        };
        let values = AGGREGATE_HEADER
            .iter()
            .map(|name| text_of(name))
            .collect::<Result<_, _>>()?;
        Ok(AggregateRow { key, values })
    }
}

/// One CSV row per run, sorted by the key columns.
pub fn aggregate(summaries: &[RunSummary]) -> String {
    aggregate_rows(summaries.iter().map(AggregateRow::from).collect())
}

/// [`aggregate`] over pre-rendered rows.
pub fn aggregate_rows(mut rows: Vec<AggregateRow>) -> String {
    rows.sort_by(|a, b| a.key.cmp(&b.key));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(&row.values).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::{any, prop, prop_assert_eq, proptest};
    use proptest::strategy::Strategy as _;

    use super::*;
    use crate::engine::{run, RunConfig};
    use crate::program::{parse_program, parse_query};

    fn min_trace(query: &str, processors: Processors) -> Trace {
        let config = RunConfig::new(
            Arc::new(parse_program("min(N) \\ min(M) <=> N=<M | true.").unwrap()),
            parse_query(query).unwrap(),
        )
        .processors(processors);
        run(&config).unwrap()
    }

    fn key(example: &str, n: usize, seed: u64) -> RunKey {
        RunKey {
            example: example.into(),
            variant: None,
            n,
            strategy: Strategy::Parr,
            processors: Processors::Unbounded,
            seed,
        }
    }

    #[test]
    fn min_three_unbounded_csv() {
        let t = min_trace("min(1),min(2),min(3)", Processors::Unbounded);
        assert_eq!(
            emit_csv(&t),
            "step,applicable,applicable_raw,applied,store_size,gc\n1,3,3,2,1,0\n"
        );
    }

    #[test]
    fn empty_trace_is_header_only() {
        let t = min_trace("min(1)", Processors::Unbounded);
        assert_eq!(emit_csv(&t), format!("{STEP_CSV_HEADER}\n"));
        assert_eq!(parse_csv(&emit_csv(&t)).unwrap(), vec![]);
    }

    #[test]
    fn summary_means_and_order() {
        let t = min_trace("min(1),min(2),min(3),min(4),min(5)", Processors::Bounded(1));
        let s = RunSummary::new(key("min", 5, 0), &t, true, OracleResult::Pass);
        assert_eq!(s.counted_steps, 4);
        assert_eq!(s.mean_applied().to_string(), "1.00");
        let json = emit_json_summary(&s);
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["counted_steps"], 4);
        assert_eq!(parsed["oracle_result"], "pass");
        let keys: Vec<usize> = ["\"example\"", "\"counted_steps\"", "\"mean_applied\"", "\"oracle_result\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(json.contains("\"mean_applied\": 1.00"));
    }

    #[test]
    fn failure_diagnostics_are_escaped() {
        let t = min_trace("min(1)", Processors::Unbounded);
        let s = RunSummary::new(key("min", 1, 0), &t, true, OracleResult::Fail("got \"x\", y".into()));
        let parsed: serde_json::Value = serde_json::from_str(&emit_json_summary(&s)).unwrap();
        assert_eq!(parsed["oracle_result"], "fail:got \"x\", y");
        let agg = aggregate(&[s]);
        let mut r = csv::Reader::from_reader(agg.as_bytes());
        let row = r.records().next().unwrap().unwrap();
        assert_eq!(&row[15], "fail:got \"x\", y");
    }

    #[test]
    fn mean_rounds_half_up() {
        let m = |numer, denom| Mean { numer, denom }.to_string();
        assert_eq!(m(19, 2), "9.50");
        assert_eq!(m(2, 3), "0.67");
        assert_eq!(m(1, 8), "0.13");
        assert_eq!(m(1, 200), "0.01");
        assert_eq!(m(0, 0), "0.00");
    }

    #[test]
    fn aggregate_sorts_rows() {
        let t = min_trace("min(1),min(2)", Processors::Unbounded);
        let rows: Vec<RunSummary> = [3, 1, 4, 0, 2]
            .into_iter()
            .map(|seed| RunSummary::new(key("primes", 30, seed), &t, true, OracleResult::Pass))
            .collect();
        let agg = aggregate(&rows);
        let lines: Vec<&str> = agg.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], AGGREGATE_HEADER.join(","));
        let seeds: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap()).collect();
        assert_eq!(seeds, vec!["0", "1", "2", "3", "4"]);
        assert!(lines[1..].iter().all(|l| l.split(',').nth(6) == Some("1")));
        assert_eq!(aggregate(&[]).lines().count(), 1);
    }

    #[test]
    fn json_summary_round_trips_into_aggregate_rows() {
        let t = min_trace("min(3),min(1),min(2)", Processors::Bounded(1));
        let key = RunKey {
            example: "min".into(),
            variant: Some("x".into()),
            n: 3,
            strategy: Strategy::Pars,
            processors: Processors::Bounded(1),
            seed: 4,
        };
        let s = RunSummary::new(key, &t, true, OracleResult::Fail("a \"b\"".into()));
        let row = AggregateRow::from_json(&emit_json_summary(&s)).unwrap();
        assert_eq!(row, AggregateRow::from(&s));
        assert!(AggregateRow::from_json("{}").is_err());
    }

    #[test]
    fn file_stem_format() {
        let mut k = key("gcd", 30, 7);
        k.variant = Some("gcd2".into());
        k.processors = Processors::Bounded(30);
        assert_eq!(k.file_stem(), "gcd-gcd2_30_parr_30_7");
        assert_eq!(key("min", 5, 1).file_stem(), "min_5_parr_unbounded_1");
    }

    fn arb_metrics() -> impl proptest::strategy::Strategy<Value = Vec<StepMetrics>> {
        prop::collection::vec((0usize..500, 0usize..500, 0usize..500, 0usize..500, any::<bool>()), 0..20)
            .prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (a, r, p, s, gc))| StepMetrics {
                        step: i + 1,
                        applicable: a,
                        applicable_raw: r,
                        applied: p,
                        store_size: s,
                        gc,
                    })
                    .collect()
            })
    }

    proptest! {
        #[test]
        fn csv_round_trips(steps in arb_metrics()) {
            let trace = Trace {
                config: min_trace("min(1)", Processors::Unbounded).config,
                initial: vec![],
                steps: steps.clone(),
                applied: vec![],
                final_store: vec![],
            };
            prop_assert_eq!(parse_csv(&emit_csv(&trace)).unwrap(), steps);
        }
    }
}
