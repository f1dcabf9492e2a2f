//! Head matching and the conflict set of applicable rule instances.
//!
//! Matching is injective: each head position binds a distinct alive store
//! constraint. Instances are discovered incrementally; every call only
//! reports matchings that use at least one of the given new ids, and the
//! propagation history guarantees a propagation rule enters the conflict
//! set at most once per id tuple.
//!
//! Enumeration order is fixed: rules in program order, then id tuples in
//! lexicographic order (head positions left to right, ids ascending).

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::program::{Program, Rule};
use crate::store::{ConstraintId, HistoryStatus, Store};
use crate::term::{
    builtin_kind, compare_terms, eval_ground, guard_holds_in, is_arithmetic, Atom, Binding,
    BuiltinKind, Signature, Term, ANON,
};

/// One applicable rule instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchInstance {
    /// Position in the conflict set's insertion order.
    pub seq: u64,
    pub rule: Atom,
    pub rule_index: usize,
    pub kept_ids: Vec<ConstraintId>,
    pub removed_ids: Vec<ConstraintId>,
    /// Bindings of the head variables.
    pub binding: Binding,
    /// Matched constraints, kept heads first, aligned with [`Self::ids`].
    pub head_terms: Vec<Term>,
}

impl MatchInstance {
    pub fn ids(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.kept_ids.iter().chain(self.removed_ids.iter()).copied()
    }

    /// `rule(Name, [Kept...], [Removed...])`, the key of the sorting
    /// strategies.
    pub fn sort_key(&self) -> Term {
        let (kept, removed) = self.head_terms.split_at(self.kept_ids.len());
        Term::compound(
            "rule",
            vec![
                Term::Sym(self.rule.clone()),
                Term::list(kept.iter().cloned()),
                Term::list(removed.iter().cloned()),
            ],
        )
    }

    /// `compare_terms` on the sort keys, without building them.
    pub fn cmp_sort_key(&self, other: &MatchInstance) -> Ordering {
        fn list(a: &[Term], b: &[Term]) -> Ordering {
            a.iter()
                .zip(b)
                .map(|(x, y)| compare_terms(x, y))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| a.len().cmp(&b.len()))
        }
        let (ak, ar) = self.head_terms.split_at(self.kept_ids.len());
        let (bk, br) = other.head_terms.split_at(other.kept_ids.len());
        compare_terms(&Term::Sym(self.rule.clone()), &Term::Sym(other.rule.clone()))
            .then_with(|| list(ak, bk))
            .then_with(|| list(ar, br))
    }

    pub fn is_alive(&self, store: &Store) -> bool {
        self.ids().all(|id| store.is_alive(id))
    }
}

/// Head pattern with variables resolved to slots.
enum Pat {
    Ground(Term),
    Var(usize),
    Anon,
    Compound(Atom, Vec<Pat>),
}

impl Pat {
    fn compile(t: &Term, vars: &mut Vec<Atom>) -> Pat {
        match t {
            Term::Var(v) if &**v == ANON => Pat::Anon,
            Term::Var(v) => Pat::Var(slot(v, vars)),
            _ if t.is_ground() => Pat::Ground(t.clone()),
            Term::Compound(f, args) => {
                Pat::Compound(f.clone(), args.iter().map(|a| Pat::compile(a, vars)).collect())
            }
            Term::Int(_) | Term::Sym(_) => unreachable!("constants are ground"),
        }
    }

    fn matches(&self, t: &Term, slots: &mut [Option<Term>], trail: &mut Vec<usize>) -> bool {
        match self {
            Pat::Ground(g) => g == t,
            Pat::Anon => true,
            Pat::Var(i) => match &slots[*i] {
                Some(v) => v == t,
                None => {
                    slots[*i] = Some(t.clone());
                    trail.push(*i);
                    true
                }
            },
            Pat::Compound(f, ps) => match t {
                Term::Compound(g, args) => {
                    f == g
                        && ps.len() == args.len()
                        && ps.iter().zip(args.iter()).all(|(p, a)| p.matches(a, slots, trail))
                }
                _ => false,
            },
        }
    }
}

fn slot(v: &Atom, vars: &mut Vec<Atom>) -> usize {
    vars.iter().position(|x| x == v).unwrap_or_else(|| {
        vars.push(v.clone());
        vars.len() - 1
    })
}

/// Integer expression over slots.
enum Expr {
    Int(i64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(Atom, Box<Expr>, Box<Expr>),
    /// Never evaluates, e.g. a symbol.
    Invalid,
}

impl Expr {
    fn compile(t: &Term, vars: &[Atom]) -> Expr {
        match t {
            Term::Int(v) => Expr::Int(*v),
            Term::Var(v) => vars.iter().position(|x| x == v).map_or(Expr::Invalid, Expr::Var),
            Term::Compound(f, args) if args.len() == 1 && &**f == "-" => {
                Expr::Neg(Box::new(Expr::compile(&args[0], vars)))
            }
            Term::Compound(f, args) if args.len() == 2 && is_arithmetic(f, 2) => Expr::Bin(
                f.clone(),
                Box::new(Expr::compile(&args[0], vars)),
                Box::new(Expr::compile(&args[1], vars)),
            ),
            _ => Expr::Invalid,
        }
    }

    /// Same result as `eval_ground` on the substituted expression, with
    /// errors as `None`.
    fn eval(&self, slots: &[Option<Term>]) -> Option<i64> {
        match self {
            Expr::Int(v) => Some(*v),
            Expr::Var(i) => match slots[*i].as_ref()? {
                Term::Int(v) => Some(*v),
                other => eval_ground(other).ok(),
            },
            Expr::Neg(a) => a.eval(slots)?.checked_neg(),
            Expr::Bin(f, a, b) => {
                let (a, b) = (a.eval(slots)?, b.eval(slots)?);
                match &**f {
                    "+" => a.checked_add(b),
                    "-" => a.checked_sub(b),
                    "*" => a.checked_mul(b),
                    "//" => a.checked_div(b),
                    "mod" if b <= 0 => None,
                    "mod" => Some(a.rem_euclid(b)),
                    _ => unreachable!("is_arithmetic admitted {f}"),
                }
            }
            Expr::Invalid => None,
        }
    }
}

enum Guard {
    Compare(fn(&i64, &i64) -> bool, Expr, Expr),
    Other(Term),
}

impl Guard {
    fn compile(g: &Term, vars: &[Atom]) -> Guard {
        if let Term::Compound(f, args) = g {
            if args.len() == 2 && builtin_kind(f, 2) == Some(BuiltinKind::Comparison) {
                let op: fn(&i64, &i64) -> bool = match &**f {
                    "=<" => i64::le,
                    "<" => i64::lt,
                    ">" => i64::gt,
                    ">=" => i64::ge,
                    "=:=" => i64::eq,
                    _ => i64::ne,
                };
                return Guard::Compare(op, Expr::compile(&args[0], vars), Expr::compile(&args[1], vars));
            }
        }
        Guard::Other(g.clone())
    }

    /// Evaluation errors count as failure.
    fn holds(&self, slots: &[Option<Term>], vars: &[Atom]) -> bool {
        match self {
            Guard::Compare(op, a, b) => match (a.eval(slots), b.eval(slots)) {
                (Some(a), Some(b)) => op(&a, &b),
                _ => false,
            },
            Guard::Other(g) => guard_holds_in(g, &to_binding(slots, vars)),
        }
    }
}

fn to_binding(slots: &[Option<Term>], vars: &[Atom]) -> Binding {
    let mut b = Binding::new();
    for (v, t) in vars.iter().zip(slots) {
        if let Some(t) = t {
            b.bind(v.clone(), t.clone()).expect("slots are distinct variables");
        }
    }
    b
}

struct CompiledRule {
    name: Atom,
    kept_len: usize,
    heads: Vec<(Signature, Pat)>,
    /// Head variables in order of first occurrence.
    vars: Vec<Atom>,
    /// Guard atoms grouped by the head position after which all their
    /// variables are bound.
    guard_at: Vec<Vec<Guard>>,
}

impl CompiledRule {
    fn new(rule: &Rule) -> Self {
        let mut vars = Vec::new();
        let mut bound_after = Vec::new();
        let heads: Vec<(Signature, Pat)> = rule
            .heads()
            .map(|h| {
                let pat = Pat::compile(h, &mut vars);
                bound_after.push(vars.len());
                (h.signature().expect("validated head"), pat)
            })
            .collect();
        let mut guard_at: Vec<Vec<Guard>> = heads.iter().map(|_| Vec::new()).collect();
        for g in &rule.guard {
            let needed = g
                .variables()
                .iter()
                .filter(|v| &***v != ANON)
                .map(|v| vars.iter().position(|x| x == v).expect("guard variables occur in the head") + 1)
                .max()
                .unwrap_or(0);
            let pos = bound_after.iter().position(|&n| n >= needed).unwrap_or(0);
            guard_at[pos].push(Guard::compile(g, &vars));
        }
        CompiledRule {
            name: rule.name.clone(),
            kept_len: rule.kept.len(),
            heads,
            vars,
            guard_at,
        }
    }
}

/// Head matcher compiled from a program.
pub struct Matcher {
    rules: Vec<CompiledRule>,
}

struct Fresh<'a> {
    ids: &'a HashSet<ConstraintId>,
    /// Ids below this one are old without a hash lookup.
    lowest: ConstraintId,
}

impl Fresh<'_> {
    fn contains(&self, id: &ConstraintId) -> bool {
        *id >= self.lowest && self.ids.contains(id)
    }
}

/// Depth-first search over head positions. Positions before `split` take
/// only old ids, `split` takes only new ids, later positions take any.
struct Search<'a> {
    rule: &'a CompiledRule,
    store: &'a Store,
    all: &'a [Vec<ConstraintId>],
    split: usize,
    fresh: Fresh<'a>,
    chosen: Vec<ConstraintId>,
    slots: Vec<Option<Term>>,
    trail: Vec<usize>,
    out: Vec<(Vec<ConstraintId>, Binding)>,
}

impl Search<'_> {
    fn run(&mut self, pos: usize) {
        let rule = self.rule;
        let (_, pattern) = &rule.heads[pos];
        for &id in &self.all[pos] {
            let admitted = match pos.cmp(&self.split) {
                Ordering::Less => !self.fresh.contains(&id),
                Ordering::Equal => self.fresh.contains(&id),
                Ordering::Greater => true,
            };
            if !admitted || self.chosen.contains(&id) {
                continue;
            }
            let term = self.store.term(id).expect("listed ids exist");
            let mark = self.trail.len();
            if pattern.matches(term, &mut self.slots, &mut self.trail)
                && rule.guard_at[pos].iter().all(|g| g.holds(&self.slots, &rule.vars))
            {
                self.chosen.push(id);
                if pos + 1 == rule.heads.len() {
                    self.out.push((self.chosen.clone(), to_binding(&self.slots, &rule.vars)));
                } else {
                    self.run(pos + 1);
                }
                self.chosen.pop();
            }
            for j in self.trail.drain(mark..) {
                self.slots[j] = None;
            }
        }
    }
}

impl Matcher {
    pub fn new(program: &Program) -> Self {
        Matcher {
            rules: program.rules().iter().map(CompiledRule::new).collect(),
        }
    }

    /// All new applicable instances that involve at least one id in `new_ids`.
    /// Instances of propagation rules are entered into the store's history.
    /// Rules that remove constraints skip it: a tuple they fire on can never
    /// be alive again, and a delta call never reports a tuple twice. The
    /// returned `seq` fields count from zero in enumeration order.
    pub fn enumerate(
        &self,
        store: &mut Store,
        new_ids: &HashSet<ConstraintId>,
    ) -> Vec<MatchInstance> {
        let mut result = Vec::new();
        if new_ids.is_empty() {
            return result;
        }
        for (rule_index, rule) in self.rules.iter().enumerate() {
            let mut found = self.matchings_of(rule, store, new_ids);
            found.sort_by(|a, b| a.0.cmp(&b.0));
            for (ids, binding) in found {
                if rule.kept_len == ids.len()
                    && store.history_check_and_add(&rule.name, &ids) == HistoryStatus::Seen
                {
                    continue;
                }
                let head_terms = ids.iter().map(|&id| store.term(id).unwrap().clone()).collect();
                let (kept, removed) = ids.split_at(rule.kept_len);
                result.push(MatchInstance {
                    seq: result.len() as u64,
                    rule: rule.name.clone(),
                    rule_index,
                    kept_ids: kept.to_vec(),
                    removed_ids: removed.to_vec(),
                    binding,
                    head_terms,
                });
            }
        }
        result
    }

    /// Semi-naive split: for each position `p`, positions before `p` use
    /// only old ids, `p` uses only new ids, later positions use any id.
    /// Every tuple with at least one new id is produced exactly once.
    fn matchings_of(
        &self,
        rule: &CompiledRule,
        store: &Store,
        new_ids: &HashSet<ConstraintId>,
    ) -> Vec<(Vec<ConstraintId>, Binding)> {
        let all: Vec<Vec<ConstraintId>> = rule
            .heads
            .iter()
            .map(|(sig, _)| store.alive_ids(sig).collect())
            .collect();
        let mut search = Search {
            rule,
            store,
            all: &all,
            split: 0,
            fresh: Fresh {
                lowest: new_ids.iter().min().copied().unwrap_or(ConstraintId(u64::MAX)),
                ids: new_ids,
            },
            chosen: Vec::with_capacity(rule.heads.len()),
            slots: vec![None; rule.vars.len()],
            trail: Vec::new(),
            out: Vec::new(),
        };
        for p in 0..rule.heads.len() {
            if all[p].iter().any(|id| search.fresh.contains(id)) {
                search.split = p;
                search.run(0);
            }
        }
        search.out
    }

    /// Upper bound on head matchings per rule: the product of the alive
    /// counts of each head position's signature.
    pub fn head_matching_bounds(&self, store: &Store) -> Vec<(Atom, u64)> {
        self.rules
            .iter()
            .map(|r| {
                let bound = r
                    .heads
                    .iter()
                    .map(|(sig, _)| store.alive_count_of(sig) as u64)
                    .fold(1u64, u64::saturating_mul);
                (r.name.clone(), bound)
            })
            .collect()
    }
}

/// Convenience wrapper compiling the program on every call.
pub fn enumerate_matchings(
    program: &Program,
    store: &mut Store,
    new_ids: &HashSet<ConstraintId>,
) -> Vec<MatchInstance> {
    Matcher::new(program).enumerate(store, new_ids)
}

pub fn count_head_matchings_bound(program: &Program, store: &Store) -> Vec<(Atom, u64)> {
    Matcher::new(program).head_matching_bounds(store)
}

/// Applicable instances in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ConflictSet {
    entries: Vec<MatchInstance>,
    next_seq: u64,
}

impl ConflictSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends instances, numbering them after every earlier entry.
    pub fn append(&mut self, instances: Vec<MatchInstance>) {
        for mut inst in instances {
            inst.seq = self.next_seq;
            self.next_seq += 1;
            self.entries.push(inst);
        }
    }

    pub fn entries(&self) -> &[MatchInstance] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops entries that reference a dead constraint.
    pub fn prune_dead(&mut self, store: &Store) {
        self.entries.retain(|e| e.is_alive(store));
    }

    /// Removes and returns the entries with the given sequence numbers,
    /// leaving the rest in order.
    pub fn take(&mut self, seqs: &HashSet<u64>) -> Vec<MatchInstance> {
        let (taken, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.entries)
            .into_iter()
            .partition(|e| seqs.contains(&e.seq));
        self.entries = kept;
        taken
    }

    pub fn take_all(&mut self) -> Vec<MatchInstance> {
        std::mem::take(&mut self.entries)
    }

    /// Puts back previously taken entries, keeping their sequence numbers.
    /// The result is sorted by `seq`.
    pub fn restore(&mut self, entries: Vec<MatchInstance>) {
        self.entries.extend(entries);
        self.entries.sort_by_key(|e| e.seq);
    }
}

/// Functional form of [`ConflictSet::prune_dead`].
pub fn prune_dead(mut cs: ConflictSet, store: &Store) -> ConflictSet {
    cs.prune_dead(store);
    cs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    fn store_of(terms: &[&str]) -> Store {
        let mut s = Store::new();
        for t in crate::program::parse_query(&terms.join(",")).unwrap().constraints {
            s.insert(t).unwrap();
        }
        s
    }

    fn all_ids(s: &Store) -> HashSet<ConstraintId> {
        s.alive_records().map(|r| r.id).collect()
    }

    #[test]
    fn min_pair_respects_guard_and_distinctness() {
        let p = parse_program("min(N) \\ min(M) <=> N=<M | true.").unwrap();
        let mut s = store_of(&["min(3)", "min(0)"]);
        let ids = all_ids(&s);
        let found = enumerate_matchings(&p, &mut s, &ids);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kept_ids, vec![ConstraintId(2)]);
        assert_eq!(found[0].removed_ids, vec![ConstraintId(1)]);
        assert_eq!(found[0].sort_key().to_string(), "rule(r1,[min(0)],[min(3)])");
    }

    #[test]
    fn primes_single_instance() {
        let p = parse_program("sift @ prime(I) \\ prime(J) <=> J mod I =:= 0 | true.").unwrap();
        let mut s = store_of(&["prime(2)", "prime(3)", "prime(4)", "prime(5)"]);
        let ids = all_ids(&s);
        let found = enumerate_matchings(&p, &mut s, &ids);
        assert_eq!(found.len(), 1);
        assert_eq!(s.term(found[0].kept_ids[0]).unwrap().to_string(), "prime(2)");
        assert_eq!(s.term(found[0].removed_ids[0]).unwrap().to_string(), "prime(4)");
    }

    #[test]
    fn history_blocks_refiring() {
        let p = parse_program("base @ arc(X,Y,D) ==> path(X,Y,D).").unwrap();
        let mut s = store_of(&["arc(a,b,1)"]);
        let ids = all_ids(&s);
        assert_eq!(enumerate_matchings(&p, &mut s, &ids).len(), 1);
        assert!(enumerate_matchings(&p, &mut s, &HashSet::new()).is_empty());
        assert!(enumerate_matchings(&p, &mut s, &ids).is_empty());
    }

    #[test]
    fn enumeration_order_is_lexicographic_per_rule() {
        let p = parse_program("a @ x(A), x(B) ==> A<B | y.\nb @ x(A) ==> z.").unwrap();
        let mut s = store_of(&["x(1)", "x(2)", "x(3)"]);
        let ids = all_ids(&s);
        let found = enumerate_matchings(&p, &mut s, &ids);
        let tuples: Vec<(String, Vec<u64>)> = found
            .iter()
            .map(|m| (m.rule.to_string(), m.ids().map(|i| i.0).collect()))
            .collect();
        let expect: Vec<(String, Vec<u64>)> = vec![
            ("a".into(), vec![1, 2]),
            ("a".into(), vec![1, 3]),
            ("a".into(), vec![2, 3]),
            ("b".into(), vec![1]),
            ("b".into(), vec![2]),
            ("b".into(), vec![3]),
        ];
        assert_eq!(tuples, expect);
    }

    #[test]
    fn delta_calls_only_report_new_ids() {
        let p = parse_program("a @ x(A), x(B) ==> A<B | y.").unwrap();
        let mut s = store_of(&["x(1)", "x(3)"]);
        let ids = all_ids(&s);
        assert_eq!(enumerate_matchings(&p, &mut s, &ids).len(), 1);
        let id = s.insert(Term::compound("x", vec![Term::int(2)])).unwrap();
        let found = enumerate_matchings(&p, &mut s, &HashSet::from([id]));
        let tuples: Vec<Vec<u64>> = found.iter().map(|m| m.ids().map(|i| i.0).collect()).collect();
        assert_eq!(tuples, vec![vec![1, 3], vec![3, 2]]);
    }

    #[test]
    fn bounds_are_products_of_multiplicities() {
        let p = parse_program(
            "min(N) \\ min(M) <=> N=<M | true.\ntrans @ arc(X,Y,D1), path(Y,Z,D2) ==> X\\=Z | path(X,Z,D1+D2).\nq @ nothing(X) <=> true.",
        )
        .unwrap();
        let s = store_of(&[
            "min(1)", "min(2)", "min(3)", "min(4)", "min(5)", "arc(a,b,1)", "arc(b,c,1)", "arc(c,d,1)",
            "path(a,b,1)", "path(b,c,1)", "path(c,d,1)", "path(a,c,2)",
        ]);
        let bounds = count_head_matchings_bound(&p, &s);
        let values: Vec<u64> = bounds.iter().map(|(_, b)| *b).collect();
        assert_eq!(values, vec![25, 12, 0]);
    }

    #[test]
    fn prune_keeps_order_of_alive_entries() {
        let p = parse_program("a @ x(A), x(B) ==> A<B | y.").unwrap();
        let mut s = store_of(&["x(1)", "x(2)", "x(3)"]);
        let ids = all_ids(&s);
        let mut cs = ConflictSet::new();
        cs.append(enumerate_matchings(&p, &mut s, &ids));
        assert!(prune_dead(ConflictSet::new(), &s).is_empty());
        let before: Vec<u64> = cs.entries().iter().map(|e| e.seq).collect();
        let cs = prune_dead(cs, &s);
        assert_eq!(cs.entries().iter().map(|e| e.seq).collect::<Vec<_>>(), before);
        s.kill(ConstraintId(2)).unwrap();
        let cs = prune_dead(cs, &s);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.entries()[0].ids().map(|i| i.0).collect::<Vec<_>>(), vec![1, 3]);
    }
}
