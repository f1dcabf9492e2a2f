//! Expected results computed without the rule engine.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::term::Term;

type Check = Result<(), String>;

fn ints_of(terms: &[Term], functor: &str) -> Vec<i64> {
    terms
        .iter()
        .filter(|t| t.functor() == Some((functor, 1)))
        .filter_map(|t| t.args()[0].as_int())
        .collect()
}

fn only(final_store: &[Term], functors: &[&str]) -> Check {
    match final_store
        .iter()
        .find(|t| !t.functor().is_some_and(|(f, _)| functors.contains(&f)))
    {
        Some(t) => Err(format!("unexpected constraint {t}")),
        None => Ok(()),
    }
}

fn show(terms: &[Term]) -> String {
    let v: Vec<String> = terms.iter().map(ToString::to_string).collect();
    format!("{{{}}}", v.join(","))
}

fn expect_multiset(mut expected: Vec<Term>, final_store: &[Term]) -> Check {
    let mut got = final_store.to_vec();
    expected.sort();
    got.sort();
    if expected == got {
        Ok(())
    } else {
        Err(format!("expected {} got {}", show(&expected), show(&got)))
    }
}

pub(super) fn min(goal: &[Term], final_store: &[Term]) -> Check {
    let smallest = ints_of(goal, "min").into_iter().min();
    let expected = smallest
        .map(|m| vec![Term::compound("min", vec![Term::int(m)])])
        .unwrap_or_default();
    expect_multiset(expected, final_store)
}

/// Sieve of Eratosthenes up to `n`.
pub(crate) fn sieve(n: usize) -> Vec<usize> {
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Expects the primes among the goal's candidates. Only meaningful for
/// goals covering a full range `2..n`, which is what the generator emits.
pub(super) fn primes(goal: &[Term], final_store: &[Term]) -> Check {
    let candidates = ints_of(goal, "prime");
    let top = candidates.iter().copied().max().unwrap_or(0).max(0) as usize;
    let wanted: BTreeSet<i64> = candidates.iter().copied().collect();
    let expected = sieve(top)
        .into_iter()
        .map(|p| p as i64)
        .filter(|p| wanted.contains(p))
        .map(|p| Term::compound("prime", vec![Term::int(p)]))
        .collect();
    expect_multiset(expected, final_store)
}

fn euclid(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        euclid(b, a % b)
    }
}

/// One `gcd(g)` with `g` the gcd of all inputs; every other constraint is `gcd(0)`.
pub(super) fn gcd(goal: &[Term], final_store: &[Term]) -> Check {
    only(final_store, &["gcd"])?;
    let inputs = ints_of(goal, "gcd");
    let g = inputs.iter().fold(0, |acc, &v| euclid(acc, v));
    let values = ints_of(final_store, "gcd");
    if values.len() != inputs.len() {
        return Err(format!("{} inputs but {} results", inputs.len(), values.len()));
    }
    let nonzero: Vec<i64> = values.iter().copied().filter(|&v| v != 0).collect();
    if nonzero != [g] {
        return Err(format!("expected one gcd({g}), nonzero values are {nonzero:?}"));
    }
    Ok(())
}

/// f(0) = f(1) = 1, f(k) = f(k-1) + f(k-2).
pub(crate) fn fibonacci(n: u64) -> i64 {
    let (mut a, mut b) = (1i64, 1i64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

pub(super) fn fib(goal: &[Term], final_store: &[Term]) -> Check {
    let expected = goal
        .iter()
        .filter(|t| t.functor() == Some(("findFibo", 1)))
        .map(|t| fibonacci(t.args()[0].as_int().unwrap_or(0) as u64))
        .reduce(|a, b| a + b)
        .map(|v| vec![Term::compound("sum", vec![Term::int(v)])])
        .unwrap_or_default();
    expect_multiset(expected, final_store)
}

fn arc(a: i64, b: i64) -> Term {
    Term::compound("->", vec![Term::int(a), Term::int(b)])
}

/// The goal arcs `d->v` must end as the chain through the sorted values.
pub(super) fn msort(goal: &[Term], final_store: &[Term]) -> Check {
    let pairs: Vec<(i64, i64)> = goal
        .iter()
        .filter_map(|t| Some((t.args().first()?.as_int()?, t.args().get(1)?.as_int()?)))
        .collect();
    let Some(&(dummy, _)) = pairs.first() else {
        return expect_multiset(vec![], final_store);
    };
    let mut values: Vec<i64> = pairs.iter().map(|&(_, v)| v).collect();
    values.sort_unstable();
    let mut prev = dummy;
    let mut expected = Vec::new();
    for v in values {
        expected.push(arc(prev, v));
        prev = v;
    }
    expect_multiset(expected, final_store)
}

fn triple(t: &Term) -> Option<(Term, Term, i64)> {
    let a = t.args();
    Some((a.first()?.clone(), a.get(1)?.clone(), a.get(2)?.as_int()?))
}

/// Paths must exist exactly for reachable pairs, with minimal distance equal
/// to the Floyd–Warshall result. Arcs stay untouched.
pub(super) fn floyd(goal: &[Term], final_store: &[Term]) -> Check {
    only(final_store, &["arc", "path"])?;
    let arcs: Vec<&Term> = goal.iter().filter(|t| t.functor() == Some(("arc", 3))).collect();
    let kept: Vec<Term> = final_store
        .iter()
        .filter(|t| t.functor() == Some(("arc", 3)))
        .cloned()
        .collect();
    expect_multiset(arcs.iter().map(|t| (*t).clone()).collect(), &kept)
        .map_err(|e| format!("arcs changed: {e}"))?;

    let mut nodes: Vec<Term> = Vec::new();
    let mut edges = Vec::new();
    for a in &arcs {
        let (x, y, d) = triple(a).ok_or_else(|| format!("malformed {a}"))?;
        for n in [&x, &y] {
            if !nodes.contains(n) {
                nodes.push(n.clone());
            }
        }
        edges.push((x, y, d));
    }
    let ix = |t: &Term| nodes.iter().position(|n| n == t).unwrap();
    let k = nodes.len();
    let mut dist: Vec<Vec<Option<i64>>> = vec![vec![None; k]; k];
    for (x, y, d) in &edges {
        let cell = &mut dist[ix(x)][ix(y)];
        *cell = Some(cell.map_or(*d, |c| c.min(*d)));
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                if let (Some(a), Some(b)) = (dist[i][m], dist[m][j]) {
                    if dist[i][j].is_none_or(|c| a + b < c) {
                        dist[i][j] = Some(a + b);
                    }
                }
            }
        }
    }

    let mut best: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for p in final_store.iter().filter(|t| t.functor() == Some(("path", 3))) {
        let (x, y, d) = triple(p).ok_or_else(|| format!("malformed {p}"))?;
        let (Some(i), Some(j)) = (nodes.iter().position(|n| *n == x), nodes.iter().position(|n| *n == y))
        else {
            return Err(format!("{p} mentions an unknown node"));
        };
        let e = best.entry((i, j)).or_insert(d);
        *e = (*e).min(d);
    }
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { None } else { dist[i][j] };
            let got = best.get(&(i, j)).copied();
            if want != got {
                return Err(format!(
                    "path {}->{}: expected {want:?}, got {got:?}",
                    nodes[i], nodes[j]
                ));
            }
        }
    }
    Ok(())
}

enum Node {
    Var(Term),
    Neg(Term),
    And(Term, Term),
    Or(Term, Term),
}

fn eval_node(id: &Term, nodes: &HashMap<Term, Node>, assignment: &HashMap<Term, bool>) -> Option<bool> {
    Some(match nodes.get(id)? {
        Node::Var(x) => *assignment.get(x)?,
        Node::Neg(a) => !eval_node(a, nodes, assignment)?,
        Node::And(a, b) => eval_node(a, nodes, assignment)? && eval_node(b, nodes, assignment)?,
        Node::Or(a, b) => eval_node(a, nodes, assignment)? || eval_node(b, nodes, assignment)?,
    })
}

fn bool_of(t: &Term) -> Option<bool> {
    match t.as_sym()? {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Reads an assignment list `[true(x2),false(x1)]`.
fn assignment_of(list: &Term) -> Option<HashMap<Term, bool>> {
    list.list_items()?
        .into_iter()
        .map(|lit| {
            let (f, 1) = lit.functor()? else { return None };
            Some((lit.args()[0].clone(), bool_of(&Term::sym(f))?))
        })
        .collect()
}

/// All `2^n` assignments are enumerated and every node's `sat/3` value
/// matches a direct evaluation of its subformula.
pub(super) fn sat(goal: &[Term], final_store: &[Term]) -> Check {
    only(final_store, &["eq", "f", "sat"])?;
    let mut nodes = HashMap::new();
    let mut vars = Vec::new();
    for t in goal {
        match t.functor() {
            Some(("eq", 2)) => {
                let (id, body) = (t.args()[0].clone(), &t.args()[1]);
                let a = body.args();
                let node = match body.functor() {
                    Some(("v", 1)) => Node::Var(a[0].clone()),
                    Some(("neg", 1)) => Node::Neg(a[0].clone()),
                    Some(("and", 2)) => Node::And(a[0].clone(), a[1].clone()),
                    Some(("or", 2)) => Node::Or(a[0].clone(), a[1].clone()),
                    _ => return Err(format!("malformed node {t}")),
                };
                nodes.insert(id, node);
            }
            Some(("f", 2)) => {
                vars = t.args()[0]
                    .list_items()
                    .ok_or_else(|| format!("malformed {t}"))?
                    .into_iter()
                    .cloned()
                    .collect();
            }
            _ => {}
        }
    }

    let mut assignments: BTreeSet<Term> = BTreeSet::new();
    for t in final_store.iter().filter(|t| t.functor() == Some(("f", 2))) {
        if t.args()[0] != Term::nil() {
            return Err(format!("unexpanded {t}"));
        }
        if !assignments.insert(t.args()[1].clone()) {
            return Err(format!("duplicate {t}"));
        }
    }
    let want = 1usize << vars.len();
    if assignments.len() != want {
        return Err(format!("{} assignments instead of {want}", assignments.len()));
    }

    let mut seen: BTreeMap<(Term, Term), bool> = BTreeMap::new();
    for t in final_store.iter().filter(|t| t.functor() == Some(("sat", 3))) {
        let a = t.args();
        let value = bool_of(&a[2]).ok_or_else(|| format!("non-boolean {t}"))?;
        if seen.insert((a[0].clone(), a[1].clone()), value).is_some() {
            return Err(format!("duplicate value for {t}"));
        }
    }
    for list in &assignments {
        let env = assignment_of(list).ok_or_else(|| format!("malformed assignment {list}"))?;
        let mut keys: Vec<&Term> = env.keys().collect();
        keys.sort();
        let mut expected_vars: Vec<&Term> = vars.iter().collect();
        expected_vars.sort();
        if keys != expected_vars {
            return Err(format!("assignment {list} does not cover the variables"));
        }
        for id in nodes.keys() {
            let expected = eval_node(id, &nodes, &env).ok_or_else(|| format!("cannot evaluate {id}"))?;
            match seen.get(&(id.clone(), list.clone())) {
                Some(&v) if v == expected => {}
                Some(&v) => return Err(format!("sat({id},{list}) is {v}, expected {expected}")),
                None => return Err(format!("no value for {id} under {list}")),
            }
        }
    }
    if seen.len() != nodes.len() * want {
        return Err(format!("{} sat constraints, expected {}", seen.len(), nodes.len() * want));
    }
    Ok(())
}

/// World-consistency check for the blocks world.
pub(super) fn blocks(goal: &[Term], final_store: &[Term]) -> Check {
    only(final_store, &["empty", "hold", "on", "clear", "grab", "putOn"])?;
    let of = |store: &[Term], f: &str, arity: usize| -> Vec<Vec<Term>> {
        store
            .iter()
            .filter(|t| t.functor() == Some((f, arity)))
            .map(|t| t.args().to_vec())
            .collect()
    };
    let arms: BTreeSet<Term> = of(goal, "empty", 1).into_iter().map(|a| a[0].clone()).collect();
    let goal_on = of(goal, "on", 2);
    let movable: BTreeSet<Term> = goal_on.iter().map(|a| a[0].clone()).collect();
    let mut places: BTreeSet<Term> = movable.clone();
    places.extend(goal_on.iter().map(|a| a[1].clone()));
    places.extend(of(goal, "clear", 1).into_iter().map(|a| a[0].clone()));

    let empty = of(final_store, "empty", 1);
    let hold = of(final_store, "hold", 2);
    let on = of(final_store, "on", 2);
    let clear = of(final_store, "clear", 1);

    for r in &arms {
        let e = empty.iter().filter(|a| a[0] == *r).count();
        let h = hold.iter().filter(|a| a[0] == *r).count();
        if e + h != 1 {
            return Err(format!("arm {r}: {e} empty and {h} hold"));
        }
    }
    if empty.len() + hold.len() != arms.len() {
        return Err("constraints about unknown arms".into());
    }
    let mut support: HashMap<&Term, &Term> = HashMap::new();
    for b in &movable {
        let placed: Vec<&Vec<Term>> = on.iter().filter(|a| a[0] == *b).collect();
        let held = hold.iter().filter(|a| a[1] == *b).count();
        match (placed.len(), held) {
            (1, 0) => {
                support.insert(b, &placed[0][1]);
            }
            (0, 1) => {}
            (p, h) => return Err(format!("block {b}: on {p} supports, held by {h} arms")),
        }
    }
    if on.len() != support.len() {
        return Err("on/2 for an unknown block".into());
    }
    for p in &places {
        let above = on.iter().filter(|a| a[1] == *p).count();
        if above > 1 {
            return Err(format!("{above} blocks on {p}"));
        }
        let held = hold.iter().any(|a| a[1] == *p);
        let c = clear.iter().filter(|a| a[0] == *p).count();
        let should = above == 0 && !held;
        if c != usize::from(should) {
            return Err(format!("clear({p}) appears {c} times, expected {}", u8::from(should)));
        }
    }
    if clear.iter().any(|a| !places.contains(&a[0])) {
        return Err("clear/1 of an unknown place".into());
    }
    for b in support.keys() {
        let mut cur: &Term = b;
        let mut hops = 0;
        while let Some(next) = support.get(cur) {
            cur = next;
            hops += 1;
            if hops > support.len() {
                return Err(format!("cycle in the stack of {b}"));
            }
        }
    }
    Ok(())
}

/// Reference disjoint-set forest with path compression.
struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
    }
}

fn partition<F: FnMut(usize) -> usize>(n: usize, mut root_of: F) -> BTreeSet<BTreeSet<usize>> {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for i in 0..n {
        groups.entry(root_of(i)).or_default().insert(i);
    }
    groups.into_values().collect()
}

/// Only `root/1` and `->/2` remain; they form a forest whose trees are
/// the sets produced by a reference union-find over the same unions.
pub(super) fn uf(goal: &[Term], final_store: &[Term]) -> Check {
    only(final_store, &["root", "->"])?;
    let nodes: Vec<Term> = goal
        .iter()
        .filter(|t| t.functor() == Some(("root", 1)))
        .map(|t| t.args()[0].clone())
        .collect();
    let ix = |t: &Term| nodes.iter().position(|n| n == t);
    let n = nodes.len();

    let mut dsu = Dsu {
        parent: (0..n).collect(),
    };
    for u in goal.iter().filter(|t| t.functor() == Some(("union", 2))) {
        let (Some(a), Some(b)) = (ix(&u.args()[0]), ix(&u.args()[1])) else {
            return Err(format!("{u} mentions an unknown node"));
        };
        dsu.union(a, b);
    }

    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut is_root = vec![false; n];
    for t in final_store {
        let a = t.args();
        match t.functor() {
            Some(("root", 1)) => {
                let i = ix(&a[0]).ok_or_else(|| format!("unknown node in {t}"))?;
                if std::mem::replace(&mut is_root[i], true) {
                    return Err(format!("duplicate {t}"));
                }
            }
            _ => {
                let (Some(x), Some(y)) = (ix(&a[0]), ix(&a[1])) else {
                    return Err(format!("unknown node in {t}"));
                };
                if parent[x].replace(y).is_some() {
                    return Err(format!("{} has two outgoing arcs", nodes[x]));
                }
            }
        }
    }
    for i in 0..n {
        if is_root[i] == parent[i].is_some() {
            return Err(format!("{} must be either a root or have one arc", nodes[i]));
        }
    }
    let tree_root = |mut x: usize| {
        let mut hops = 0;
        while let Some(p) = parent[x] {
            x = p;
            hops += 1;
            if hops > n {
                return None;
            }
        }
        Some(x)
    };
    let mut roots = Vec::with_capacity(n);
    for i in 0..n {
        roots.push(tree_root(i).ok_or_else(|| format!("cycle through {}", nodes[i]))?);
    }
    if partition(n, |i| roots[i]) != partition(n, |i| dsu.find(i)) {
        return Err("trees differ from the reference partition".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_query;

    fn q(s: &str) -> Vec<Term> {
        parse_query(s).unwrap().constraints
    }

    #[test]
    fn sieve_and_fibonacci() {
        assert_eq!(sieve(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(sieve(1), Vec::<usize>::new());
        let f: Vec<i64> = (0..8).map(fibonacci).collect();
        assert_eq!(f, vec![1, 1, 2, 3, 5, 8, 13, 21]);
    }

    #[test]
    fn min_primes_gcd_fib() {
        assert!(min(&q("min(3),min(1),min(2)"), &q("min(1)")).is_ok());
        assert!(min(&q("min(3),min(1),min(2)"), &q("min(1),min(2)")).is_err());
        assert!(primes(&q("prime(2),prime(3),prime(4),prime(5)"), &q("prime(5),prime(2),prime(3)")).is_ok());
        assert!(primes(&q("prime(2),prime(3),prime(4)"), &q("prime(2),prime(3),prime(4)")).is_err());
        assert!(gcd(&q("gcd(4),gcd(6)"), &q("gcd(0),gcd(2)")).is_ok());
        assert!(gcd(&q("gcd(4),gcd(6)"), &q("gcd(2),gcd(2)")).is_err());
        assert!(gcd(&q("gcd(4),gcd(6)"), &q("gcd(2)")).is_err());
        assert!(fib(&q("findFibo(5)"), &q("sum(8)")).is_ok());
        assert!(fib(&q("findFibo(7)"), &q("sum(21)")).is_ok());
        assert!(fib(&q("findFibo(0)"), &q("sum(1)")).is_ok());
        assert!(fib(&q("findFibo(5)"), &q("sum(5),sum(3)")).is_err());
    }

    #[test]
    fn msort_chain() {
        let goal = q("0->2,0->3,0->4");
        assert!(msort(&goal, &q("0->2,2->3,3->4")).is_ok());
        assert!(msort(&goal, &q("0->2,2->3,2->4")).is_err());
    }

    #[test]
    fn floyd_distances() {
        let goal = q("arc(1,2,5),arc(2,3,5),arc(1,3,20)");
        let good = q("arc(1,2,5),arc(2,3,5),arc(1,3,20),path(1,2,5),path(2,3,5),path(1,3,10)");
        assert_eq!(floyd(&goal, &good), Ok(()));
        let wrong = q("arc(1,2,5),arc(2,3,5),arc(1,3,20),path(1,2,5),path(2,3,5),path(1,3,20)");
        assert!(floyd(&goal, &wrong).is_err());
        let extra = q("arc(1,2,5),arc(2,3,5),arc(1,3,20),path(1,2,5),path(2,3,5),path(1,3,10),path(2,1,3)");
        assert!(floyd(&goal, &extra).is_err());
        // larger duplicates may survive next to the minimum
        let dup = q("arc(1,2,5),arc(2,3,5),arc(1,3,20),path(1,2,5),path(2,3,5),path(1,3,10),path(1,3,10)");
        assert_eq!(floyd(&goal, &dup), Ok(()));
    }

    #[test]
    fn sat_single_variable() {
        let goal = q("eq(e1,v(x1)),f([x1],[])");
        let good = q("eq(e1,v(x1)),f([],[true(x1)]),f([],[false(x1)]),sat(e1,[true(x1)],true),sat(e1,[false(x1)],false)");
        assert_eq!(sat(&goal, &good), Ok(()));
        let bad = q("eq(e1,v(x1)),f([],[true(x1)]),f([],[false(x1)]),sat(e1,[true(x1)],true),sat(e1,[false(x1)],true)");
        assert!(sat(&goal, &bad).is_err());
        let missing = q("eq(e1,v(x1)),f([],[true(x1)]),sat(e1,[true(x1)],true)");
        assert!(sat(&goal, &missing).is_err());
    }

    #[test]
    fn sat_negation() {
        let goal = q("eq(e1,neg(e2)),eq(e2,v(x1)),f([x1],[])");
        let store = q("eq(e1,neg(e2)),eq(e2,v(x1)),f([],[true(x1)]),f([],[false(x1)]),\
                       sat(e2,[true(x1)],true),sat(e2,[false(x1)],false),\
                       sat(e1,[true(x1)],false),sat(e1,[false(x1)],true)");
        assert_eq!(sat(&goal, &store), Ok(()));
    }

    #[test]
    fn blocks_world_checker() {
        let goal = q("empty(r1),on(b1,b2),clear(b1),on(b2,floor1),clear(spare1),grab(r1,b1),putOn(r1,spare1)");
        let moved = q("empty(r1),on(b1,spare1),clear(b1),on(b2,floor1),clear(b2)");
        assert_eq!(blocks(&goal, &moved), Ok(()));
        let held = q("hold(r1,b1),on(b2,floor1),clear(b2),clear(spare1),putOn(r1,spare1)");
        assert_eq!(blocks(&goal, &held), Ok(()));
        let lost = q("empty(r1),on(b2,floor1),clear(b2),clear(spare1)");
        assert!(blocks(&goal, &lost).is_err());
        let stale_clear = q("empty(r1),on(b1,spare1),clear(b1),on(b2,floor1),clear(b2),clear(spare1)");
        assert!(blocks(&goal, &stale_clear).is_err());
        let stacked = q("empty(r1),on(b1,b2),on(b2,b1),clear(spare1),clear(floor1)");
        assert!(blocks(&goal, &stacked).is_err());
    }

    #[test]
    fn union_find_checker() {
        let goal = q("root(a1),root(a2),root(a3),union(a1,a2)");
        assert_eq!(uf(&goal, &q("root(a2),a1->a2,root(a3)")), Ok(()));
        assert_eq!(uf(&goal, &q("root(a1),a2->a1,root(a3)")), Ok(()));
        assert!(uf(&goal, &q("root(a1),root(a2),root(a3)")).is_err());
        assert!(uf(&goal, &q("root(a2),a1->a2,a3->a2")).is_err());
        assert!(uf(&goal, &q("root(a2),a1->a2,root(a3),find(a1,x)")).is_err());
        assert!(uf(&goal, &q("a1->a2,a2->a1,root(a3)")).is_err());
    }
}
