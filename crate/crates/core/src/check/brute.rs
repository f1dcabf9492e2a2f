//! Brute-force matching over random stores, used to cross-check the
//! indexed matcher.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matcher::Matcher;
use crate::program::Program;
use crate::store::{ConstraintId, Store};
use crate::term::{eval_guard_atom, substitute, Binding, Term, ANON};

/// `(rule index, ids in head order, binding sorted by name)`.
pub type Matching = (usize, Vec<ConstraintId>, Vec<(String, String)>);

fn sorted(b: &Binding) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = b.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
    v.sort();
    v
}

/// Every injective assignment of alive constraints to rule heads whose
/// guard holds, rules in program order and id tuples ascending.
pub fn brute_force_matchings(program: &Program, store: &Store) -> Vec<Matching> {
    let ids: Vec<ConstraintId> = store.alive_records().map(|r| r.id).collect();
    let mut out = Vec::new();
    for (index, rule) in program.rules().iter().enumerate() {
        let heads: Vec<&Term> = rule.heads().collect();
        let mut tuple = Vec::with_capacity(heads.len());
        each_tuple(&ids, heads.len(), &mut tuple, &mut |tuple| {
            let mut b = Binding::new();
            let matched = heads
                .iter()
                .zip(tuple)
                .all(|(h, &id)| b.match_term(h, store.term(id).expect("alive")).is_ok());
            let guarded = matched
                && rule
                    .guard
                    .iter()
                    .all(|g| eval_guard_atom(&substitute(g, &b)).unwrap_or(false));
            if guarded {
                out.push((index, tuple.to_vec(), sorted(&b)));
            }
        });
    }
    out
}

fn each_tuple(
    ids: &[ConstraintId],
    len: usize,
    tuple: &mut Vec<ConstraintId>,
    f: &mut dyn FnMut(&[ConstraintId]),
) {
    if tuple.len() == len {
        f(tuple);
        return;
    }
    for &id in ids {
        if !tuple.contains(&id) {
            tuple.push(id);
            each_tuple(ids, len, tuple, f);
            tuple.pop();
        }
    }
}

const ATOMS: [&str; 6] = ["a", "b", "true", "false", "e1", "[]"];

fn random_value(rng: &mut ChaCha8Rng) -> Term {
    match rng.gen_range(0..10) {
        0..=4 => Term::int(rng.gen_range(0..5)),
        5..=7 => Term::sym(ATOMS.choose(rng).expect("nonempty")),
        8 => Term::list([Term::compound(
            if rng.gen_bool(0.5) { "true" } else { "false" },
            vec![Term::sym("a")],
        )]),
        _ => Term::compound("v", vec![Term::sym("a")]),
    }
}

/// Instantiates a random rule head with small random values, so that
/// stores contain plenty of partial and complete matches.
fn random_constraint(program: &Program, rng: &mut ChaCha8Rng) -> Term {
    let heads: Vec<&Term> = program.rules().iter().flat_map(|r| r.heads()).collect();
    let head = *heads.choose(rng).expect("programs have heads");
    let mut b = Binding::new();
    for v in head.variables() {
        if &*v != ANON && !b.contains(&v) {
            b.bind(v, random_value(rng)).expect("fresh variable");
        }
    }
    let t = substitute(head, &b);
    if t.is_ground() {
        t
    } else {
        // anonymous variables
        fill_anonymous(&t, rng)
    }
}

fn fill_anonymous(t: &Term, rng: &mut ChaCha8Rng) -> Term {
    match t {
        Term::Var(_) => random_value(rng),
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| fill_anonymous(a, rng)).collect()),
        _ => t.clone(),
    }
}

/// A store of 1 to `max` random constraints for `program`, some of them
/// already removed.
pub fn random_store(program: &Program, max: usize, rng: &mut ChaCha8Rng) -> Store {
    let mut store = Store::new();
    for _ in 0..rng.gen_range(1..=max) {
        let id = store
            .insert(random_constraint(program, rng))
            .expect("instantiated heads are constraints");
        if rng.gen_ratio(1, 8) {
            store.kill(id).expect("alive");
        }
    }
    store
}

/// Compares the matcher with brute force on `stores` random stores of at
/// most 8 constraints.
pub fn matcher_agrees(program: &Program, stores: usize, seed: u64) -> Result<(), String> {
    let matcher = Matcher::new(program);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..stores {
        let mut store = random_store(program, 8, &mut rng);
        let expected = brute_force_matchings(program, &store);
        let all: HashSet<ConstraintId> = store.alive_records().map(|r| r.id).collect();
        let got: Vec<Matching> = matcher
            .enumerate(&mut store, &all)
            .into_iter()
            .map(|m| {
                let ids = m.ids().collect();
                (m.rule_index, ids, sorted(&m.binding))
            })
            .collect();
        if got != expected {
            let terms: Vec<String> = store.alive_terms().iter().map(ToString::to_string).collect();
            return Err(format!(
                "store {i} [{}]: matcher found {}, brute force {}",
                terms.join(", "),
                got.len(),
                expected.len()
            ));
        }
    }
    Ok(())
}
