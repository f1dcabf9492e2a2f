//! Sequential simulation of parallel rule application.
//!
//! A run repeatedly performs parallel steps until the conflict set is empty:
//!
//! 1. drop conflict-set entries that reference dead constraints;
//! 2. order the remaining entries with the run's strategy;
//! 3. select as many entries as there are processors (all of them when
//!    unbounded); unselected entries stay for later steps;
//! 4. apply the selected entries one after the other: removals take effect
//!    immediately, so a later selected entry may find its constraints gone
//!    and is skipped as stale;
//! 5. insert all body constraints of the step at once, then match them.
//!
//! Because removals are immediate and insertions deferred, every step is
//! equivalent to some sequence of single rule applications; see
//! [`validate_trace`].

mod strategy;
mod validate;

pub use strategy::{order_conflict_set, Scheduler, Strategy};
pub use validate::{validate_trace, Replayer, ReplayError};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matcher::{ConflictSet, MatchInstance, Matcher};
use crate::program::{classify_builtin, Goal, Program, TermClass};
use crate::report::StepMetrics;
use crate::store::{ConstraintId, Store, StoreError};
use crate::term::{eval_body_builtin, normalize, substitute, Atom, EvalError, Term};

pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Number of rule instances a step may apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Processors {
    Bounded(usize),
    Unbounded,
}

impl Processors {
    /// `Bounded(0)` is not a processor count.
    pub fn bounded(k: usize) -> Option<Self> {
        (k >= 1).then_some(Processors::Bounded(k))
    }

    pub fn limit(self, applicable: usize) -> usize {
        match self {
            Processors::Bounded(k) => k.min(applicable),
            Processors::Unbounded => applicable,
        }
    }
}

impl fmt::Display for Processors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Processors::Bounded(k) => write!(f, "{k}"),
            Processors::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for Processors {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "unbounded" {
            return Ok(Processors::Unbounded);
        }
        s.parse::<usize>()
            .ok()
            .and_then(Processors::bounded)
            .ok_or_else(|| format!("invalid processor count `{s}`"))
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub program: Arc<Program>,
    pub goal: Goal,
    pub strategy: Strategy,
    pub processors: Processors,
    pub seed: u64,
    pub permute_query: bool,
    pub max_steps: usize,
}

impl RunConfig {
    pub fn new(program: Arc<Program>, goal: Goal) -> Self {
        RunConfig {
            program,
            goal,
            strategy: Strategy::Par,
            processors: Processors::Unbounded,
            seed: 0,
            permute_query: true,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn processors(mut self, processors: Processors) -> Self {
        self.processors = processors;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn permute_query(mut self, permute: bool) -> Self {
        self.permute_query = permute;
        self
    }

    pub fn max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Sequential execution: one processor.
    pub fn sequential(self) -> Self {
        self.processors(Processors::Bounded(1))
    }
}

/// The run parameters recorded in a trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEcho {
    pub strategy: Strategy,
    pub processors: Processors,
    pub seed: u64,
    pub permute_query: bool,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedRecord {
    pub step: usize,
    pub instance: MatchInstance,
    /// Ids given to the body constraints at the end of the step.
    pub inserted_ids: Vec<ConstraintId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub config: ConfigEcho,
    /// Goal constraints in insertion order (after permutation); they hold
    /// ids `1..=initial.len()`.
    pub initial: Vec<Term>,
    pub steps: Vec<StepMetrics>,
    /// Empty when the run was checked online by [`run_checked`].
    pub applied: Vec<AppliedRecord>,
    /// Alive constraints at the end, in id order.
    pub final_store: Vec<Term>,
}

impl Trace {
    /// Steps that applied at least one instance.
    pub fn counted_steps(&self) -> usize {
        self.steps.iter().filter(|s| !s.gc).count()
    }

    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn gc_steps(&self) -> usize {
        self.total_steps() - self.counted_steps()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("step limit of {limit} reached with work remaining")]
    StepLimitExceeded { limit: usize, trace: Box<Trace> },
    #[error("rule `{rule}` failed: {error}")]
    Eval { rule: Atom, error: EvalError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApplyOutcome {
    /// The body constraints were appended to the insert buffer.
    Applied,
    /// A matched constraint was removed earlier in the same step.
    Stale,
}

/// Applies one instance: removals happen now, body constraints go to
/// `buffer`. Body variables not bound by the head become fresh `$gN`
/// identifiers unless a built-in binds them first.
pub fn apply_instance(
    store: &mut Store,
    program: &Program,
    inst: &MatchInstance,
    fresh_counter: &mut u64,
    buffer: &mut Vec<Term>,
) -> Result<ApplyOutcome, RunError> {
    if !inst.is_alive(store) {
        return Ok(ApplyOutcome::Stale);
    }
    for &id in &inst.removed_ids {
        store.kill(id)?;
    }
    let rule = &program.rules()[inst.rule_index];
    let fail = |error| RunError::Eval {
        rule: rule.name.clone(),
        error,
    };
    let mut env = inst.binding.clone();
    for b in &rule.body {
        if classify_builtin(b) == TermClass::BuiltinAtom {
            eval_body_builtin(b, &mut env).map_err(fail)?;
            continue;
        }
        for v in b.variables() {
            if &*v != crate::term::ANON && !env.contains(&v) {
                *fresh_counter += 1;
                env.bind(v, Term::sym(&format!("$g{fresh_counter}")))
                    .expect("fresh variable is unbound");
            }
        }
        buffer.push(normalize(&substitute(b, &env)).map_err(fail)?);
    }
    Ok(ApplyOutcome::Applied)
}

/// State of one run.
pub struct Engine<'s> {
    program: Arc<Program>,
    matcher: Matcher,
    scheduler: &'s dyn Scheduler,
    echo: ConfigEcho,
    store: Store,
    conflicts: ConflictSet,
    rng: ChaCha8Rng,
    fresh: u64,
    initial: Vec<Term>,
    steps: Vec<StepMetrics>,
    applied: Vec<AppliedRecord>,
    last: Vec<AppliedRecord>,
    keep_applied: bool,
}

impl<'s> Engine<'s> {
    /// Permutes and inserts the goal, then collects the initial conflict set.
    pub fn new(config: &RunConfig, scheduler: &'s dyn Scheduler) -> Result<Self, RunError> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut initial = config.goal.constraints.clone();
        if config.permute_query {
            initial.shuffle(&mut rng);
        }
        let mut store = Store::new();
        let mut ids = HashSet::with_capacity(initial.len());
        for t in &initial {
            ids.insert(store.insert(t.clone())?);
        }
        let matcher = Matcher::new(&config.program);
        let mut conflicts = ConflictSet::new();
        conflicts.append(matcher.enumerate(&mut store, &ids));
        Ok(Engine {
            program: config.program.clone(),
            matcher,
            scheduler,
            echo: ConfigEcho {
                strategy: config.strategy,
                processors: config.processors,
                seed: config.seed,
                permute_query: config.permute_query,
                max_steps: config.max_steps,
            },
            store,
            conflicts,
            rng,
            fresh: 0,
            initial,
            steps: Vec::new(),
            applied: Vec::new(),
            last: Vec::new(),
            keep_applied: true,
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn conflict_set(&self) -> &ConflictSet {
        &self.conflicts
    }

    pub fn initial(&self) -> &[Term] {
        &self.initial
    }

    /// Records of the instances applied by the latest step.
    pub fn last_applied(&self) -> &[AppliedRecord] {
        &self.last
    }

    /// Stops accumulating applied records in the trace; only
    /// [`Engine::last_applied`] remains available.
    pub fn discard_applied(&mut self) {
        self.keep_applied = false;
        self.applied.clear();
    }

    fn retire_last(&mut self) {
        if self.keep_applied {
            self.applied.append(&mut self.last);
        } else {
            self.last.clear();
        }
    }

    /// Performs one parallel step, or returns `None` once no alive entry is left.
    pub fn parallel_step(&mut self) -> Result<Option<StepMetrics>, RunError> {
        let applicable_raw = self.conflicts.len();
        self.conflicts.prune_dead(&self.store);
        let applicable = self.conflicts.len();
        if applicable == 0 {
            return Ok(None);
        }
        let step = self.steps.len() + 1;
        self.retire_last();

        let limit = self.echo.processors.limit(applicable);
        let (selected, rest) = self.scheduler.select(self.conflicts.take_all(), limit, &mut self.rng);
        self.conflicts.restore(rest);

        let mut buffer = Vec::new();
        let mut applied = 0;
        let mut pending = Vec::new();
        for inst in selected {
            let before = buffer.len();
            match apply_instance(&mut self.store, &self.program, &inst, &mut self.fresh, &mut buffer)? {
                ApplyOutcome::Applied => {
                    applied += 1;
                    pending.push((inst, before..buffer.len()));
                }
                ApplyOutcome::Stale => {}
            }
        }

        let mut inserted = Vec::with_capacity(buffer.len());
        for t in buffer {
            inserted.push(self.store.insert(t)?);
        }
        for (instance, range) in pending {
            self.last.push(AppliedRecord {
                step,
                instance,
                inserted_ids: inserted[range].to_vec(),
            });
        }
        let new_ids: HashSet<ConstraintId> = inserted.into_iter().collect();
        self.conflicts.append(self.matcher.enumerate(&mut self.store, &new_ids));

        let metrics = StepMetrics {
            step,
            applicable,
            applicable_raw,
            applied,
            store_size: self.store.len(),
            gc: applied == 0,
        };
        self.steps.push(metrics.clone());
        Ok(Some(metrics))
    }

    /// Runs steps until quiescence or the step limit.
    pub fn run_to_end(mut self) -> Result<Trace, RunError> {
        loop {
            if self.steps.len() >= self.echo.max_steps {
                self.conflicts.prune_dead(&self.store);
                if self.conflicts.is_empty() {
                    break;
                }
                let limit = self.echo.max_steps;
                return Err(RunError::StepLimitExceeded {
                    limit,
                    trace: Box::new(self.into_trace()),
                });
            }
            if self.parallel_step()?.is_none() {
                break;
            }
        }
        Ok(self.into_trace())
    }

    pub fn into_trace(mut self) -> Trace {
        self.retire_last();
        Trace {
            config: self.echo,
            initial: self.initial,
            steps: self.steps,
            applied: self.applied,
            final_store: self.store.alive_terms(),
        }
    }
}

/// Executes a run with the configured strategy.
pub fn run(config: &RunConfig) -> Result<Trace, RunError> {
    run_with(config, &config.strategy)
}

/// Executes a run with a custom scheduler in place of the configured strategy.
pub fn run_with(config: &RunConfig, scheduler: &dyn Scheduler) -> Result<Trace, RunError> {
    Engine::new(config, scheduler)?.run_to_end()
}

/// Executes a run and replays every step as it happens. The returned trace
/// has no applied records, which keeps long runs within memory.
pub fn run_checked(config: &RunConfig) -> Result<(Trace, Result<(), ReplayError>), RunError> {
    run_checked_with(config, &config.strategy)
}

/// [`run_checked`] with a custom scheduler.
pub fn run_checked_with(
    config: &RunConfig,
    scheduler: &dyn Scheduler,
) -> Result<(Trace, Result<(), ReplayError>), RunError> {
    let mut engine = Engine::new(config, scheduler)?;
    engine.discard_applied();
    let mut replay = Replayer::new(&config.program, &config.goal, engine.initial());
    loop {
        if engine.steps.len() >= config.max_steps {
            engine.conflicts.prune_dead(&engine.store);
            if !engine.conflicts.is_empty() {
                return engine.run_to_end().map(|t| (t, Ok(())));
            }
            break;
        }
        let Some(metrics) = engine.parallel_step()? else {
            break;
        };
        if let Ok(r) = &mut replay {
            if let Err(e) = r.step(&metrics, engine.last_applied()) {
                replay = Err(e);
            }
        }
    }
    let trace = engine.into_trace();
    let verdict = replay.and_then(|r| r.finish(&trace.final_store));
    Ok((trace, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{parse_program, parse_query};
    use crate::term::Binding;

    const MIN: &str = "min(N) \\ min(M) <=> N=<M | true.";
    const GCD: &str = "gcd(N) \\ gcd(M) <=> 0<N, N=<M | gcd(M-N).";

    fn config(src: &str, query: &str) -> RunConfig {
        RunConfig::new(
            Arc::new(parse_program(src).unwrap()),
            parse_query(query).unwrap(),
        )
    }

    fn sorted(mut v: Vec<Term>) -> Vec<String> {
        v.sort();
        v.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn min_unbounded_finishes_in_one_step() {
        for s in Strategy::ALL {
            let t = run(&config(MIN, "min(3),min(0),min(2)").strategy(s)).unwrap();
            assert_eq!(t.counted_steps(), 1);
            assert_eq!(sorted(t.final_store), vec!["min(0)"]);
        }
    }

    #[test]
    fn min_sequential_takes_n_minus_one_steps() {
        let t = run(&config(MIN, "min(1),min(2),min(3),min(4),min(5)").sequential()).unwrap();
        assert_eq!(t.counted_steps(), 4);
        assert!(t.steps.iter().all(|s| s.applied == 1));
    }

    #[test]
    fn overlapping_kept_constraint_allows_parallel_application() {
        let c = config(MIN, "min(0),min(3),min(2)").permute_query(false);
        let t = run(&c).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].applied, 2);
        assert!(t.applied.iter().all(|r| r.instance.kept_ids == vec![ConstraintId(1)]));
    }

    #[test]
    fn gcd_sequential_reaches_euclid_result() {
        let t = run(&config(GCD, "gcd(4),gcd(6)").sequential()).unwrap();
        assert_eq!(sorted(t.final_store), vec!["gcd(0)", "gcd(2)"]);
    }

    #[test]
    fn apply_instance_outcomes() {
        let program = parse_program(MIN).unwrap();
        let mut store = Store::new();
        let a = store.insert(Term::compound("min", vec![Term::int(3)])).unwrap();
        let b = store.insert(Term::compound("min", vec![Term::int(0)])).unwrap();
        let inst = MatchInstance {
            seq: 0,
            rule: "r1".into(),
            rule_index: 0,
            kept_ids: vec![b],
            removed_ids: vec![a],
            binding: Binding::new(),
            head_terms: vec![store.term(b).unwrap().clone(), store.term(a).unwrap().clone()],
        };
        let (mut fresh, mut buffer) = (0, Vec::new());
        let out = apply_instance(&mut store, &program, &inst, &mut fresh, &mut buffer).unwrap();
        assert_eq!(out, ApplyOutcome::Applied);
        assert!(!store.is_alive(a) && buffer.is_empty());
        let out = apply_instance(&mut store, &program, &inst, &mut fresh, &mut buffer).unwrap();
        assert_eq!(out, ApplyOutcome::Stale);
    }

    #[test]
    fn gcd_body_is_evaluated_into_buffer() {
        let program = parse_program(GCD).unwrap();
        let mut store = Store::new();
        let n = store.insert(Term::compound("gcd", vec![Term::int(3)])).unwrap();
        let m = store.insert(Term::compound("gcd", vec![Term::int(7)])).unwrap();
        let mut binding = Binding::new();
        binding.bind("N".into(), Term::int(3)).unwrap();
        binding.bind("M".into(), Term::int(7)).unwrap();
        let inst = MatchInstance {
            seq: 0,
            rule: "r1".into(),
            rule_index: 0,
            kept_ids: vec![n],
            removed_ids: vec![m],
            binding,
            head_terms: vec![store.term(n).unwrap().clone(), store.term(m).unwrap().clone()],
        };
        let (mut fresh, mut buffer) = (0, Vec::new());
        apply_instance(&mut store, &program, &inst, &mut fresh, &mut buffer).unwrap();
        assert_eq!(buffer, vec![Term::compound("gcd", vec![Term::int(4)])]);
        // deferred: nothing inserted yet
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn fresh_identifiers_are_shared_within_a_body() {
        let c = config("u @ union(A,B) <=> find(A,X), find(B,Y), link(X,Y).", "union(a,b)");
        let t = run(&c).unwrap();
        assert_eq!(
            sorted(t.final_store),
            vec!["find(a,$g1)", "find(b,$g2)", "link($g1,$g2)"]
        );
    }

    #[test]
    fn body_builtins_bind_outputs() {
        let c = config("s @ x(A) <=> neg(A,S), y(S).", "x(true)");
        let t = run(&c).unwrap();
        assert_eq!(sorted(t.final_store), vec!["y(false)"]);
    }

    #[test]
    fn failing_body_check_aborts_the_run() {
        let c = config("s @ x(A) <=> A > 5, y.", "x(1)");
        assert!(matches!(run(&c), Err(RunError::Eval { .. })));
    }

    #[test]
    fn step_limit_returns_partial_trace() {
        let c = config("c @ count(N) <=> count(N+1).", "count(0)").max_steps(5);
        match run(&c) {
            Err(RunError::StepLimitExceeded { limit, trace }) => {
                assert_eq!(limit, 5);
                assert_eq!(trace.steps.len(), 5);
                assert_eq!(sorted(trace.final_store), vec!["count(5)"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bounded_steps_keep_unselected_entries() {
        let c = config("a @ x(N) <=> y(N).", "x(1),x(2),x(3)")
            .processors(Processors::Bounded(2))
            .permute_query(false);
        let t = run(&c).unwrap();
        let applied: Vec<usize> = t.steps.iter().map(|s| s.applied).collect();
        assert_eq!(applied, vec![2, 1]);
        assert_eq!(t.steps[1].applicable, 1);
    }

    #[test]
    fn empty_goal_takes_no_steps() {
        let t = run(&config(MIN, "min(1)")).unwrap();
        assert_eq!(t.total_steps(), 0);
        assert_eq!(t.final_store, vec![Term::compound("min", vec![Term::int(1)])]);
    }

    #[test]
    fn processors_parse() {
        assert_eq!("unbounded".parse(), Ok(Processors::Unbounded));
        assert_eq!("4".parse(), Ok(Processors::Bounded(4)));
        assert!("0".parse::<Processors>().is_err());
        assert!("many".parse::<Processors>().is_err());
    }
}
