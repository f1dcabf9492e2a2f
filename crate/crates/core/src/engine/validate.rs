//! Replays a trace as a sequence of single rule applications.
//!
//! The replay keeps its own id-indexed table instead of a [`Store`] and
//! re-derives every match from the rule heads, so it does not share the
//! engine's indexing or matching code.
//!
//! [`Store`]: crate::store::Store

use std::collections::{BTreeMap, HashSet};

use crate::program::{classify_builtin, Goal, Program, TermClass};
use crate::store::ConstraintId;
use crate::term::{eval_body_builtin, eval_guard_atom, normalize, substitute, Binding, Term, ANON};

use crate::report::StepMetrics;

use super::{AppliedRecord, Trace};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("initial constraints are not a permutation of the goal")]
    InitialMismatch,
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("step {step}: {message}")]
    Step { step: usize, message: String },
    #[error("final store differs from replay")]
    FinalMismatch,
}

/// Incremental replay: feed it one step at a time with [`Replayer::step`].
///
/// Only alive constraints are kept, so memory stays proportional to the
/// store rather than to the length of the run.
pub struct Replayer<'p> {
    program: &'p Program,
    alive: BTreeMap<u64, Term>,
    next_id: u64,
    fresh: u64,
    steps: usize,
    records: usize,
}

fn sorted_binding(b: &Binding) -> Vec<(&str, &Term)> {
    let mut v: Vec<(&str, &Term)> = b.iter().collect();
    v.sort();
    v
}

impl<'p> Replayer<'p> {
    /// Starts a replay of `program` on `goal`, whose constraints were
    /// inserted in the order `initial`.
    pub fn new(program: &'p Program, goal: &Goal, initial: &[Term]) -> Result<Self, ReplayError> {
        let mut a = goal.constraints.clone();
        let mut b = initial.to_vec();
        a.sort();
        b.sort();
        if a != b {
            return Err(ReplayError::InitialMismatch);
        }
        Ok(Replayer {
            program,
            alive: (1..).zip(initial.iter().cloned()).collect(),
            next_id: initial.len() as u64 + 1,
            fresh: 0,
            steps: 0,
            records: 0,
        })
    }

    /// Checks one step given its metrics and its applied records in order.
    pub fn step(&mut self, metrics: &StepMetrics, records: &[AppliedRecord]) -> Result<(), ReplayError> {
        self.steps += 1;
        let step = self.steps;
        let fail = |message: String| ReplayError::Step { step, message };
        if metrics.step != step {
            return Err(fail(format!("numbered {}", metrics.step)));
        }
        if records.len() != metrics.applied {
            return Err(fail(format!(
                "{} records for {} applications",
                records.len(),
                metrics.applied
            )));
        }
        let step_start = self.next_id - 1;
        let mut buffer = Vec::new();
        let mut expected_ids = Vec::new();
        for rec in records {
            if rec.step != step {
                return Err(ReplayError::Record {
                    index: self.records,
                    message: format!("belongs to step {} not {step}", rec.step),
                });
            }
            self.check_record(rec, step_start, &mut buffer)
                .map_err(|message| ReplayError::Record {
                    index: self.records,
                    message,
                })?;
            expected_ids.extend(rec.inserted_ids.iter().copied());
            self.records += 1;
        }
        for (term, id) in buffer.into_iter().zip(&expected_ids) {
            if id.0 != self.next_id {
                return Err(fail(format!("inserted id {id} out of sequence")));
            }
            self.alive.insert(id.0, term);
            self.next_id += 1;
        }
        if self.alive.len() != metrics.store_size {
            return Err(fail(format!(
                "store size {} but replay has {}",
                metrics.store_size,
                self.alive.len()
            )));
        }
        Ok(())
    }

    /// Compares the replayed store with the reported final store (id order).
    pub fn finish(self, final_store: &[Term]) -> Result<(), ReplayError> {
        if self.alive.values().ne(final_store.iter()) {
            return Err(ReplayError::FinalMismatch);
        }
        Ok(())
    }

    fn check_record(&mut self, rec: &AppliedRecord, step_start: u64, buffer: &mut Vec<Term>) -> Result<(), String> {
        let inst = &rec.instance;
        let rule = self
            .program
            .rules()
            .get(inst.rule_index)
            .filter(|r| r.name == inst.rule)
            .ok_or_else(|| format!("unknown rule `{}`", inst.rule))?;
        if inst.kept_ids.len() != rule.kept.len() || inst.removed_ids.len() != rule.removed.len() {
            return Err("head count does not match the rule".into());
        }

        let ids: Vec<ConstraintId> = inst.ids().collect();
        let distinct: HashSet<_> = ids.iter().collect();
        if distinct.len() != ids.len() {
            return Err("a constraint is matched twice".into());
        }
        let mut binding = Binding::new();
        for (head, &id) in rule.heads().zip(&ids) {
            if id.0 > step_start {
                return Err(format!("{id} was created during the same step"));
            }
            let term = self
                .alive
                .get(&id.0)
                .ok_or_else(|| format!("{id} is not alive"))?;
            binding
                .match_term(head, term)
                .map_err(|_| format!("{id} does not match head `{head}`"))?;
        }
        if sorted_binding(&binding) != sorted_binding(&inst.binding) {
            return Err("recorded binding differs from the head match".into());
        }
        for g in &rule.guard {
            if !eval_guard_atom(&substitute(g, &binding)).unwrap_or(false) {
                return Err(format!("guard `{g}` does not hold"));
            }
        }

        for id in &inst.removed_ids {
            self.alive.remove(&id.0);
        }
        let mut produced = 0;
        for b in &rule.body {
            if classify_builtin(b) == TermClass::BuiltinAtom {
                eval_body_builtin(b, &mut binding).map_err(|e| e.to_string())?;
                continue;
            }
            for v in b.variables() {
                if &*v != ANON && !binding.contains(&v) {
                    self.fresh += 1;
                    binding
                        .bind(v, Term::sym(&format!("$g{}", self.fresh)))
                        .expect("fresh variable");
                }
            }
            buffer.push(normalize(&substitute(b, &binding)).map_err(|e| e.to_string())?);
            produced += 1;
        }
        if produced != rec.inserted_ids.len() {
            return Err(format!(
                "body produced {produced} constraints but {} ids were recorded",
                rec.inserted_ids.len()
            ));
        }
        Ok(())
    }
}

/// Checks that `trace` is a sound execution of `program` on `goal`.
pub fn validate_trace(program: &Program, goal: &Goal, trace: &Trace) -> Result<(), ReplayError> {
    let mut replay = Replayer::new(program, goal, &trace.initial)?;
    let total_applied: usize = trace.steps.iter().map(|s| s.applied).sum();
    if total_applied != trace.applied.len() {
        return Err(ReplayError::Step {
            step: 0,
            message: format!(
                "metrics report {total_applied} applications, trace has {}",
                trace.applied.len()
            ),
        });
    }
    let mut rest = &trace.applied[..];
    for metrics in &trace.steps {
        let (now, later) = rest.split_at(metrics.applied);
        replay.step(metrics, now)?;
        rest = later;
    }
    replay.finish(&trace.final_store)
}
