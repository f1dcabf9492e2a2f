//! Identified multiset of ground CHR constraints with a propagation history.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::program::{classify_builtin, TermClass};
use crate::term::{Atom, Signature, Term};

/// Identity of a stored constraint. Ids start at 1 and are never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub u64);

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintRecord {
    pub id: ConstraintId,
    pub term: Term,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("cannot store non-ground `{0}`")]
    NonGround(Term),
    #[error("`{0}` is not a CHR constraint")]
    NotAConstraint(Term),
    #[error("constraint {0} is already dead")]
    DeadConstraint(ConstraintId),
    #[error("no constraint with id {0}")]
    UnknownId(ConstraintId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryStatus {
    New,
    Seen,
}

#[derive(Debug, Clone, Default)]
pub struct Store {
    records: Vec<ConstraintRecord>,
    index: HashMap<Signature, BTreeSet<ConstraintId>>,
    history: HashSet<(Atom, Box<[ConstraintId]>)>,
    alive: usize,
    kills: usize,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, term: Term) -> Result<ConstraintId, StoreError> {
        if !term.is_ground() {
            return Err(StoreError::NonGround(term));
        }
        let sig = match term.signature() {
            Some(sig) if classify_builtin(&term) == TermClass::ChrConstraint => sig,
            _ => return Err(StoreError::NotAConstraint(term)),
        };
        let id = ConstraintId(self.records.len() as u64 + 1);
        self.index.entry(sig).or_default().insert(id);
        self.records.push(ConstraintRecord {
            id,
            term,
            alive: true,
        });
        self.alive += 1;
        Ok(id)
    }

    /// Marks a constraint as removed. The record is kept as a tombstone.
    pub fn kill(&mut self, id: ConstraintId) -> Result<(), StoreError> {
        let rec = self.record_mut(id)?;
        if !rec.alive {
            return Err(StoreError::DeadConstraint(id));
        }
        rec.alive = false;
        let sig = rec.term.signature().expect("stored terms have a signature");
        if let Some(ids) = self.index.get_mut(&sig) {
            ids.remove(&id);
        }
        self.alive -= 1;
        self.kills += 1;
        Ok(())
    }

    fn record_mut(&mut self, id: ConstraintId) -> Result<&mut ConstraintRecord, StoreError> {
        let idx = (id.0 as usize)
            .checked_sub(1)
            .ok_or(StoreError::UnknownId(id))?;
        self.records.get_mut(idx).ok_or(StoreError::UnknownId(id))
    }

    pub fn get(&self, id: ConstraintId) -> Option<&ConstraintRecord> {
        (id.0 as usize)
            .checked_sub(1)
            .and_then(|i| self.records.get(i))
    }

    pub fn term(&self, id: ConstraintId) -> Option<&Term> {
        self.get(id).map(|r| &r.term)
    }

    pub fn is_alive(&self, id: ConstraintId) -> bool {
        self.get(id).is_some_and(|r| r.alive)
    }

    /// Alive ids of one signature, ascending.
    pub fn alive_ids(&self, sig: &Signature) -> impl Iterator<Item = ConstraintId> + '_ {
        self.index.get(sig).into_iter().flatten().copied()
    }

    pub fn alive_count_of(&self, sig: &Signature) -> usize {
        self.index.get(sig).map_or(0, BTreeSet::len)
    }

    pub fn alive_by_signature(&self, functor: &str, arity: usize) -> Vec<ConstraintId> {
        let sig = Signature {
            functor: Atom::from(functor),
            arity,
        };
        self.alive_ids(&sig).collect()
    }

    /// Records `(rule, ids)` in the history, reporting whether it was new.
    pub fn history_check_and_add(&mut self, rule: &Atom, ids: &[ConstraintId]) -> HistoryStatus {
        if self.history.insert((rule.clone(), ids.into())) {
            HistoryStatus::New
        } else {
            HistoryStatus::Seen
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Number of alive constraints.
    pub fn len(&self) -> usize {
        self.alive
    }

    pub fn is_empty(&self) -> bool {
        self.alive == 0
    }

    pub fn inserted(&self) -> usize {
        self.records.len()
    }

    pub fn killed(&self) -> usize {
        self.kills
    }

    pub fn records(&self) -> &[ConstraintRecord] {
        &self.records
    }

    pub fn alive_records(&self) -> impl Iterator<Item = &ConstraintRecord> {
        self.records.iter().filter(|r| r.alive)
    }

    pub fn alive_terms(&self) -> Vec<Term> {
        self.alive_records().map(|r| r.term.clone()).collect()
    }

    /// Full scan comparing the index against the records' alive flags.
    pub fn is_consistent(&self) -> bool {
        let mut expected: HashMap<Signature, BTreeSet<ConstraintId>> = HashMap::new();
        for r in self.alive_records() {
            expected
                .entry(r.term.signature().unwrap())
                .or_default()
                .insert(r.id);
        }
        let indexed: HashMap<_, _> = self
            .index
            .iter()
            .filter(|(_, ids)| !ids.is_empty())
            .map(|(s, ids)| (s.clone(), ids.clone()))
            .collect();
        expected == indexed && self.alive == self.records.len() - self.kills
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min(v: i64) -> Term {
        Term::compound("min", vec![Term::int(v)])
    }

    #[test]
    fn insert_assigns_ascending_ids() {
        let mut s = Store::new();
        assert_eq!(s.insert(min(3)), Ok(ConstraintId(1)));
        assert_eq!(s.len(), 1);
        assert_eq!(s.insert(min(3)), Ok(ConstraintId(2)));
        assert_eq!(s.len(), 2);
        assert!(matches!(
            s.insert(Term::compound("prime", vec![Term::var("X")])),
            Err(StoreError::NonGround(_))
        ));
        assert!(matches!(
            s.insert(Term::compound("=<", vec![Term::int(1), Term::int(2)])),
            Err(StoreError::NotAConstraint(_))
        ));
    }

    #[test]
    fn kill_keeps_tombstones() {
        let mut s = Store::new();
        let a = s.insert(min(3)).unwrap();
        let b = s.insert(min(3)).unwrap();
        s.kill(a).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.is_alive(b));
        assert_eq!(s.records().len(), 2);
        assert_eq!(s.kill(a), Err(StoreError::DeadConstraint(a)));
        s.kill(b).unwrap();
        assert_eq!(s.len(), 0);
        assert_eq!(s.kill(ConstraintId(9)), Err(StoreError::UnknownId(ConstraintId(9))));
        assert!(s.is_consistent());
    }

    #[test]
    fn alive_by_signature_tracks_kills() {
        let mut s = Store::new();
        s.insert(min(3)).unwrap();
        s.insert(min(0)).unwrap();
        assert_eq!(s.alive_by_signature("min", 1), vec![ConstraintId(1), ConstraintId(2)]);
        s.kill(ConstraintId(1)).unwrap();
        assert_eq!(s.alive_by_signature("min", 1), vec![ConstraintId(2)]);
        assert!(s.alive_by_signature("max", 1).is_empty());
        assert!(s.alive_by_signature("min", 2).is_empty());
    }

    #[test]
    fn history_distinguishes_rule_and_order() {
        let mut s = Store::new();
        let base: Atom = "base".into();
        let trans: Atom = "trans".into();
        let (i5, i9) = (ConstraintId(5), ConstraintId(9));
        assert_eq!(s.history_check_and_add(&base, &[i5]), HistoryStatus::New);
        assert_eq!(s.history_check_and_add(&base, &[i5]), HistoryStatus::Seen);
        assert_eq!(s.history_check_and_add(&trans, &[i5, i9]), HistoryStatus::New);
        assert_eq!(s.history_check_and_add(&trans, &[i9, i5]), HistoryStatus::New);
        assert_eq!(s.history_check_and_add(&trans, &[i5]), HistoryStatus::New);
        assert_eq!(s.history_len(), 4);
    }
}
