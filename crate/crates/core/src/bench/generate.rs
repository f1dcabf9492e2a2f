//! Query generators. Goals are listed in a fixed order; the engine applies
//! the per-run permutation.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeneratorError {
    #[error("{benchmark} needs n >= {min}, got {n}")]
    SizeTooSmall {
        benchmark: &'static str,
        n: usize,
        min: usize,
    },
    #[error("{benchmark} has no variant `{variant}`")]
    UnknownVariant {
        benchmark: &'static str,
        variant: String,
    },
    #[error("{arcs} arcs requested but a graph on {n} nodes has only {pairs} ordered pairs")]
    TooManyArcs { n: usize, arcs: usize, pairs: usize },
}

fn c(f: &str, args: Vec<Term>) -> Term {
    Term::compound(f, args)
}

fn int(v: usize) -> Term {
    Term::int(v as i64)
}

fn sym(prefix: &str, i: usize) -> Term {
    Term::sym(&format!("{prefix}{i}"))
}

pub(super) fn min(n: usize) -> Vec<Term> {
    (1..=n).map(|v| c("min", vec![int(v)])).collect()
}

pub(super) fn primes(n: usize) -> Vec<Term> {
    (2..=n).map(|v| c("prime", vec![int(v)])).collect()
}

pub(super) fn gcd(n: usize) -> Vec<Term> {
    (2..=n).map(|v| c("gcd", vec![int(v)])).collect()
}

/// `round(1.618^k + k)`, halves rounded up.
pub(crate) fn gcd2_value(k: usize) -> i64 {
    (1.618f64.powi(k as i32) + k as f64 + 0.5).floor() as i64
}

pub(super) fn gcd2(n: usize) -> Vec<Term> {
    (2..=n)
        .map(|k| c("gcd", vec![Term::int(gcd2_value(k))]))
        .collect()
}

pub(super) fn fib(n: usize) -> Vec<Term> {
    vec![c("findFibo", vec![int(n)])]
}

pub(super) fn msort(n: usize) -> Vec<Term> {
    (2..=n).map(|v| c("->", vec![int(0), int(v)])).collect()
}

/// `factor * n` arcs `arc(i,j,d)` with `i < j` on distinct node pairs and
/// `d = n*(j-i)^2 + c` for the arc's 1-based creation index `c`.
pub(super) fn floyd(n: usize, factor: usize, seed: u64) -> Result<Vec<Term>, GeneratorError> {
    let pairs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (i + 1..=n).map(move |j| (i, j)))
        .collect();
    let arcs = factor * n;
    if arcs > pairs.len() {
        return Err(GeneratorError::TooManyArcs {
            n,
            arcs,
            pairs: pairs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pairs.len(), arcs)
        .into_iter()
        .enumerate()
        .map(|(created, p)| {
            let (i, j) = pairs[p];
            let d = n * (j - i) * (j - i) + created + 1;
            c("arc", vec![int(i), int(j), int(d)])
        })
        .collect())
}

enum Shape {
    Leaf(usize),
    Op(&'static str, Box<Shape>, Box<Shape>),
    Neg(Box<Shape>),
}

/// Balanced tree over the leaves `lo..hi` with random `and`/`or` nodes.
fn balanced(lo: usize, hi: usize, rng: &mut ChaCha8Rng) -> Shape {
    if hi - lo == 1 {
        return Shape::Leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let op = if rng.gen_bool(0.5) { "and" } else { "or" };
    let left = balanced(lo, mid, rng);
    let right = balanced(mid, hi, rng);
    Shape::Op(op, Box::new(left), Box::new(right))
}

/// Wraps the `target`-th child edge (counted in preorder over operation
/// nodes, left child first) into a negation.
fn insert_neg(shape: &mut Shape, target: &mut usize) -> bool {
    if let Shape::Op(_, l, r) = shape {
        for child in [l, r] {
            if *target == 0 {
                let inner = std::mem::replace(&mut **child, Shape::Leaf(0));
                **child = Shape::Neg(Box::new(inner));
                return true;
            }
            *target -= 1;
            if insert_neg(child, target) {
                return true;
            }
        }
    }
    false
}

fn emit(shape: &Shape, n: usize, next: &mut usize, out: &mut Vec<Term>) -> Term {
    *next += 1;
    let id = sym("e", *next);
    let slot = out.len();
    out.push(Term::nil());
    let body = match shape {
        Shape::Leaf(i) => c("v", vec![sym("x", i % n + 1)]),
        Shape::Neg(a) => c("neg", vec![emit(a, n, next, out)]),
        Shape::Op(op, a, b) => {
            let a = emit(a, n, next, out);
            let b = emit(b, n, next, out);
            c(op, vec![a, b])
        }
    };
    out[slot] = c("eq", vec![id.clone(), body]);
    id
}

/// A formula with `n` binary operations over the variables `x1..xn` and one
/// negation, as `eq/2` nodes `e1..em`, plus `f([x1,...,xn],[])`.
pub(super) fn sat(n: usize, seed: u64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shape = balanced(0, n + 1, &mut rng);
    let mut target = rng.gen_range(0..2 * n);
    let inserted = insert_neg(&mut shape, &mut target);
    debug_assert!(inserted);
    let mut out = Vec::new();
    emit(&shape, n, &mut 0, &mut out);
    out.push(c(
        "f",
        vec![Term::list((1..=n).map(|i| sym("x", i))), Term::nil()],
    ));
    out
}

/// `n` arms and `factor * n` blocks on stacks of two (the last stack holds
/// one block when the count is odd). Each stack stands on its own floor
/// pseudo-block and has one spare clear floor slot. Every arm gets a grab
/// of a distinct block and a put onto a random block or spare slot.
pub(super) fn blocks(n: usize, factor: usize, seed: u64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = factor * n;
    let stacks = b.div_ceil(2);
    let mut out: Vec<Term> = (1..=n).map(|r| c("empty", vec![sym("r", r)])).collect();
    for s in 1..=stacks {
        let bottom = 2 * s;
        let floor = sym("floor", s);
        if bottom <= b {
            let top = sym("b", bottom - 1);
            out.push(c("on", vec![top.clone(), sym("b", bottom)]));
            out.push(c("clear", vec![top]));
            out.push(c("on", vec![sym("b", bottom), floor]));
        } else {
            let only = sym("b", bottom - 1);
            out.push(c("on", vec![only.clone(), floor]));
            out.push(c("clear", vec![only]));
        }
        out.push(c("clear", vec![sym("spare", s)]));
    }
    let grabbed = index::sample(&mut rng, b, n);
    for (r, blk) in grabbed.into_iter().enumerate() {
        out.push(c("grab", vec![sym("r", r + 1), sym("b", blk + 1)]));
    }
    let targets: Vec<Term> = (1..=b)
        .map(|i| sym("b", i))
        .chain((1..=stacks).map(|s| sym("spare", s)))
        .collect();
    for r in 1..=n {
        let t = targets.choose(&mut rng).expect("at least one target").clone();
        out.push(c("putOn", vec![sym("r", r), t]));
    }
    out
}

/// `2n` roots `a1..a2n` and either `2n` random unions of distinct nodes or
/// a random perfect matching of `n` unions.
pub(super) fn uf(n: usize, matching: bool, seed: u64) -> Vec<Term> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = 2 * n;
    let mut out: Vec<Term> = (1..=nodes).map(|i| c("root", vec![sym("a", i)])).collect();
    if matching {
        let mut perm: Vec<usize> = (1..=nodes).collect();
        perm.shuffle(&mut rng);
        for pair in perm.chunks(2) {
            out.push(c("union", vec![sym("a", pair[0]), sym("a", pair[1])]));
        }
    } else {
        for _ in 0..nodes {
            let pick = index::sample(&mut rng, nodes, 2);
            out.push(c(
                "union",
                vec![sym("a", pick.index(0) + 1), sym("a", pick.index(1) + 1)],
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn show(v: &[Term]) -> Vec<String> {
        v.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn ranges() {
        assert_eq!(show(&min(3)), ["min(1)", "min(2)", "min(3)"]);
        assert_eq!(show(&primes(5)), ["prime(2)", "prime(3)", "prime(4)", "prime(5)"]);
        assert_eq!(show(&primes(2)), ["prime(2)"]);
        assert_eq!(show(&gcd(4)), ["gcd(2)", "gcd(3)", "gcd(4)"]);
        assert_eq!(show(&fib(7)), ["findFibo(7)"]);
        assert_eq!(show(&msort(4)), ["0->2", "0->3", "0->4"]);
    }

    #[test]
    fn gcd2_values() {
        assert_eq!(show(&gcd2(4)), ["gcd(5)", "gcd(7)", "gcd(11)"]);
        // 1.618^10 = 122.93..., + 10
        assert_eq!(gcd2_value(10), 133);
    }

    #[test]
    fn floyd_arcs_are_distinct_and_ordered() {
        let arcs = floyd(7, 3, 4).unwrap();
        assert_eq!(arcs.len(), 21);
        let mut pairs = HashSet::new();
        let mut dists = HashSet::new();
        for (k, a) in arcs.iter().enumerate() {
            let args: Vec<i64> = a.args().iter().map(|t| t.as_int().unwrap()).collect();
            assert!(args[0] < args[1]);
            assert!(pairs.insert((args[0], args[1])));
            assert_eq!(args[2], 7 * (args[1] - args[0]).pow(2) + k as i64 + 1);
            assert!(dists.insert(args[2]));
        }
        assert_eq!(floyd(7, 2, 4).unwrap().len(), 14);
        assert!(matches!(floyd(5, 3, 0), Err(GeneratorError::TooManyArcs { .. })));
        assert_eq!(floyd(3, 1, 9).unwrap().len(), 3);
    }

    #[test]
    fn sat_formula_shape() {
        for n in 1..8 {
            let goal = sat(n, n as u64);
            let eqs: Vec<&Term> = goal.iter().filter(|t| t.functor() == Some(("eq", 2))).collect();
            // n operations, n + 1 leaves, one negation
            assert_eq!(eqs.len(), 2 * n + 2);
            let count = |f: &str| eqs.iter().filter(|e| e.args()[1].functor().map(|x| x.0) == Some(f)).count();
            assert_eq!(count("neg"), 1);
            assert_eq!(count("and") + count("or"), n);
            assert_eq!(count("v"), n + 1);
            assert_eq!(eqs[0].args()[0], Term::sym("e1"));
            assert_eq!(goal.last().unwrap().functor(), Some(("f", 2)));
        }
    }

    #[test]
    fn blocks_layout() {
        let g = blocks(5, 1, 3);
        let count = |f: &str| g.iter().filter(|t| t.functor().map(|x| x.0) == Some(f)).count();
        assert_eq!(count("empty"), 5);
        assert_eq!(count("on"), 5);
        assert_eq!(count("grab"), 5);
        assert_eq!(count("putOn"), 5);
        // 3 stack tops + 3 spare slots
        assert_eq!(count("clear"), 6);
        let grabbed: HashSet<String> = g
            .iter()
            .filter(|t| t.functor() == Some(("grab", 2)))
            .map(|t| t.args()[1].to_string())
            .collect();
        assert_eq!(grabbed.len(), 5);
    }

    #[test]
    fn uf_variants() {
        let dense = uf(5, false, 1);
        assert_eq!(dense.len(), 20);
        for t in &dense[10..] {
            assert_ne!(t.args()[0], t.args()[1]);
        }
        let m = uf(5, true, 1);
        assert_eq!(m.len(), 15);
        let touched: HashSet<String> = m[10..]
            .iter()
            .flat_map(|t| t.args().iter().map(ToString::to_string))
            .collect();
        assert_eq!(touched.len(), 10);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(sat(5, 2), sat(5, 2));
        assert_eq!(blocks(7, 2, 2), blocks(7, 2, 2));
        assert_eq!(uf(6, false, 9), uf(6, false, 9));
        assert_eq!(floyd(7, 2, 1), floyd(7, 2, 1));
        assert_ne!(uf(6, false, 9), uf(6, false, 10));
    }
}
