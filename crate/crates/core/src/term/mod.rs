//! First-order terms, one-way matching and the canonical term order.
//!
//! Stores only ever hold ground terms; variables appear in rule patterns.
//! Lists are `'.'/2` cells terminated by the symbol `[]`.

mod eval;

pub use eval::{
    builtin_kind, eval_body_builtin, eval_ground, eval_guard_atom, guard_holds_in, is_arithmetic,
    normalize,
    BuiltinKind, EvalError,
};

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

/// Interned-ish name shared between clones of a term.
pub type Atom = Arc<str>;

pub const NIL: &str = "[]";
pub const CONS: &str = ".";

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Int(i64),
    Sym(Atom),
    Var(Atom),
    /// Arity is always at least one; zero-arity functors are symbols.
    Compound(Atom, Arc<[Term]>),
}

/// Functor and arity of a constraint. Symbols have arity 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub functor: Atom,
    pub arity: usize,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.functor, self.arity)
    }
}

impl Term {
    pub fn int(value: i64) -> Self {
        Term::Int(value)
    }

    pub fn sym(name: &str) -> Self {
        Term::Sym(Atom::from(name))
    }

    pub fn var(name: &str) -> Self {
        Term::Var(Atom::from(name))
    }

    /// Builds a compound, collapsing the zero-argument case to a symbol.
    pub fn compound(functor: &str, args: Vec<Term>) -> Self {
        if args.is_empty() {
            Term::sym(functor)
        } else {
            Term::Compound(Atom::from(functor), args.into())
        }
    }

    pub fn nil() -> Self {
        Term::sym(NIL)
    }

    pub fn cons(head: Term, tail: Term) -> Self {
        Term::Compound(Atom::from(CONS), vec![head, tail].into())
    }

    /// A proper list `[a, b, ...]`.
    pub fn list(items: impl IntoIterator<Item = Term>) -> Self {
        Self::list_with_tail(items, Term::nil())
    }

    pub fn list_with_tail(items: impl IntoIterator<Item = Term>, tail: Term) -> Self {
        let items: Vec<Term> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::cons(item, acc))
    }

    /// Elements of a proper list, or `None` if this is not one.
    pub fn list_items(&self) -> Option<Vec<&Term>> {
        let mut items = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Term::Sym(s) if &**s == NIL => return Some(items),
                Term::Compound(f, args) if &**f == CONS && args.len() == 2 => {
                    items.push(&args[0]);
                    cur = &args[1];
                }
                _ => return None,
            }
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Sym(_) => true,
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Term::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// Name and arity for symbols and compounds.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Sym(s) => Some((s, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    pub fn signature(&self) -> Option<Signature> {
        match self {
            Term::Sym(s) => Some(Signature {
                functor: s.clone(),
                arity: 0,
            }),
            Term::Compound(f, args) => Some(Signature {
                functor: f.clone(),
                arity: args.len(),
            }),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    /// Variable names in first-occurrence order, without duplicates.
    pub fn variables(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Atom>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::Int(_) | Term::Sym(_) => {}
        }
    }
}

/// Name of the anonymous variable; each occurrence matches independently.
pub const ANON: &str = "_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("terms do not match")]
pub struct MatchFailure;

/// Variable bindings accumulated while matching a rule head.
///
/// Heads bind only a handful of variables, so a flat vector beats a map
/// and makes backtracking a truncate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Binding {
    entries: Vec<(Atom, Term)>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Term> {
        self.entries
            .iter()
            .find(|(n, _)| &**n == name)
            .map(|(_, t)| t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.entries.iter().map(|(n, t)| (&**n, t))
    }

    /// Binds `name` to a ground value. Rebinding to an equal value is a
    /// no-op; rebinding to a different one fails.
    pub fn bind(&mut self, name: Atom, value: Term) -> Result<(), MatchFailure> {
        debug_assert!(value.is_ground(), "binding {name} to non-ground {value}");
        match self.get(&name) {
            Some(existing) if *existing == value => Ok(()),
            Some(_) => Err(MatchFailure),
            None => {
                self.entries.push((name, value));
                Ok(())
            }
        }
    }

    /// Extends the binding so that `pattern` instantiates to `subject`.
    /// On failure the binding is left as it was.
    pub fn match_term(&mut self, pattern: &Term, subject: &Term) -> Result<(), MatchFailure> {
        let mark = self.entries.len();
        let ok = self.match_rec(pattern, subject);
        if !ok {
            self.entries.truncate(mark);
            return Err(MatchFailure);
        }
        Ok(())
    }

    fn match_rec(&mut self, pattern: &Term, subject: &Term) -> bool {
        match (pattern, subject) {
            (Term::Var(v), _) if &**v == ANON => true,
            (Term::Var(v), _) => self.bind(v.clone(), subject.clone()).is_ok(),
            (Term::Int(a), Term::Int(b)) => a == b,
            (Term::Sym(a), Term::Sym(b)) => a == b,
            (Term::Compound(f, pargs), Term::Compound(g, sargs)) => {
                f == g
                    && pargs.len() == sargs.len()
                    && pargs
                        .iter()
                        .zip(sargs.iter())
                        .all(|(p, s)| self.match_rec(p, s))
            }
            _ => false,
        }
    }
}

/// One-way matching of `pattern` against the ground `subject`, extending `acc`.
pub fn match_term(pattern: &Term, subject: &Term, acc: &Binding) -> Result<Binding, MatchFailure> {
    let mut b = acc.clone();
    b.match_term(pattern, subject)?;
    Ok(b)
}

/// Replaces bound variables; unbound ones are left in place.
pub fn substitute(pattern: &Term, binding: &Binding) -> Term {
    match pattern {
        Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| pattern.clone()),
        Term::Int(_) | Term::Sym(_) => pattern.clone(),
        Term::Compound(f, args) => {
            if pattern.is_ground() {
                return pattern.clone();
            }
            Term::Compound(
                f.clone(),
                args.iter().map(|a| substitute(a, binding)).collect(),
            )
        }
    }
}

fn kind_rank(t: &Term) -> u8 {
    match t {
        Term::Var(_) => 0,
        Term::Int(_) => 1,
        Term::Sym(_) => 2,
        Term::Compound(..) => 3,
    }
}

/// Canonical total order: numbers < symbols < compounds. Numbers compare
/// by value, symbols by name, compounds by arity, then functor name, then
/// arguments left to right. Variables (never present in stores) sort first.
pub fn compare_terms(a: &Term, b: &Term) -> Ordering {
    match (a, b) {
        (Term::Int(x), Term::Int(y)) => x.cmp(y),
        (Term::Sym(x), Term::Sym(y)) | (Term::Var(x), Term::Var(y)) => x.cmp(y),
        (Term::Compound(f, xs), Term::Compound(g, ys)) => xs
            .len()
            .cmp(&ys.len())
            .then_with(|| f.cmp(g))
            .then_with(|| {
                xs.iter()
                    .zip(ys.iter())
                    .map(|(x, y)| compare_terms(x, y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            }),
        _ => kind_rank(a).cmp(&kind_rank(b)),
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_terms(self, other)
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

/// Infix operators understood by the parser and printer: (name, priority, associativity).
pub(crate) const INFIX_OPS: &[(&str, u16, Assoc)] = &[
    ("->", 1050, Assoc::Xfy),
    ("=<", 700, Assoc::Xfx),
    ("<", 700, Assoc::Xfx),
    (">", 700, Assoc::Xfx),
    (">=", 700, Assoc::Xfx),
    ("=:=", 700, Assoc::Xfx),
    ("=\\=", 700, Assoc::Xfx),
    ("=", 700, Assoc::Xfx),
    ("\\=", 700, Assoc::Xfx),
    ("+", 500, Assoc::Yfx),
    ("-", 500, Assoc::Yfx),
    ("*", 400, Assoc::Yfx),
    ("//", 400, Assoc::Yfx),
    ("mod", 400, Assoc::Yfx),
];

pub(crate) const PREFIX_MINUS_PRIORITY: u16 = 200;

/// Priority limit for arguments and list elements. It is above `->` so
/// arcs need no parentheses inside terms.
pub(crate) const ARG_PRIORITY: u16 = 1100;

pub(crate) fn infix_op(name: &str) -> Option<(u16, Assoc)> {
    INFIX_OPS
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, p, a)| (p, a))
}

/// Operator priority of a term as printed (0 for primary terms).
fn priority(t: &Term) -> u16 {
    match t {
        Term::Compound(f, args) if args.len() == 2 => infix_op(f).map_or(0, |(p, _)| p),
        Term::Compound(f, args) if args.len() == 1 && &**f == "-" => PREFIX_MINUS_PRIORITY,
        _ => 0,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term, max: u16) -> fmt::Result {
    let negative_operand = max < ARG_PRIORITY && matches!(t, Term::Int(v) if *v < 0);
    let needs_parens = priority(t) > max || negative_operand;
    if needs_parens {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(v) => write!(f, "{v}"),
            Term::Sym(s) | Term::Var(s) => write!(f, "{s}"),
            Term::Compound(name, args) => {
                if &**name == CONS && args.len() == 2 {
                    return write_list(f, self);
                }
                if args.len() == 2 {
                    if let Some((p, assoc)) = infix_op(name) {
                        let (lmax, rmax) = match assoc {
                            Assoc::Xfx => (p - 1, p - 1),
                            Assoc::Xfy => (p - 1, p),
                            Assoc::Yfx => (p, p - 1),
                        };
                        write_operand(f, &args[0], lmax)?;
                        if name.chars().all(char::is_alphabetic) {
                            write!(f, " {name} ")?;
                        } else {
                            write!(f, "{name}")?;
                        }
                        return write_operand(f, &args[1], rmax);
                    }
                }
                if args.len() == 1 && &**name == "-" {
                    write!(f, "-")?;
                    return match &args[0] {
                        // keep `-(3)` distinct from the literal -3
                        Term::Int(_) => write!(f, "({})", args[0]),
                        a => write_operand(f, a, PREFIX_MINUS_PRIORITY),
                    };
                }
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write_operand(f, a, ARG_PRIORITY)?;
                }
                write!(f, ")")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    write!(f, "[")?;
    let mut cur = t;
    let mut first = true;
    loop {
        match cur {
            Term::Compound(name, args) if &**name == CONS && args.len() == 2 => {
                if !first {
                    write!(f, ",")?;
                }
                write_operand(f, &args[0], ARG_PRIORITY)?;
                first = false;
                cur = &args[1];
            }
            Term::Sym(s) if &**s == NIL => break,
            tail => {
                write!(f, "|")?;
                write_operand(f, tail, ARG_PRIORITY)?;
                break;
            }
        }
    }
    write!(f, "]")
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
