//! Rules, programs and goals, plus the parser for the rule dialect.
//!
//! ```text
//! name @ Kept \ Removed <=> Guard | Body.     simpagation
//! name @ Head <=> Guard | Body.               simplification
//! name @ Head ==> Guard | Body.               propagation
//! ```

mod lexer;
mod parse;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::term::{builtin_kind, normalize, Atom, EvalError, Signature, Term};
use parse::Parser;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("invalid rule `{rule}`: {message}")]
    Validation { rule: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("`{0}` is not a CHR constraint")]
    NotAConstraint(Term),
}

/// Whether a term is evaluated as a built-in or stored as a CHR constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermClass {
    BuiltinAtom,
    ChrConstraint,
}

pub fn classify_builtin(t: &Term) -> TermClass {
    match t.functor() {
        Some((name, arity)) if builtin_kind(name, arity).is_some() => TermClass::BuiltinAtom,
        _ => TermClass::ChrConstraint,
    }
}

/// `name @ kept \ removed <=> guard | body`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: Atom,
    pub kept: Vec<Term>,
    pub removed: Vec<Term>,
    pub guard: Vec<Term>,
    pub body: Vec<Term>,
}

impl Rule {
    /// Kept heads followed by removed heads, the order used for id tuples.
    pub fn heads(&self) -> impl Iterator<Item = &Term> {
        self.kept.iter().chain(self.removed.iter())
    }

    pub fn head_count(&self) -> usize {
        self.kept.len() + self.removed.len()
    }

    pub fn is_propagation(&self) -> bool {
        self.removed.is_empty()
    }

    fn head_vars(&self) -> Vec<Atom> {
        let mut vars = Vec::new();
        for h in self.heads() {
            h.collect_vars(&mut vars);
        }
        vars
    }

    fn validate(&self) -> Result<(), ProgramError> {
        let fail = |message: String| ProgramError::Validation {
            rule: self.name.to_string(),
            message,
        };
        if self.kept.is_empty() && self.removed.is_empty() {
            return Err(fail("the head is empty".into()));
        }
        for h in self.heads() {
            if h.functor().is_none() {
                return Err(fail(format!("head `{h}` is not a constraint")));
            }
            if classify_builtin(h) == TermClass::BuiltinAtom {
                return Err(fail(format!("built-in `{h}` cannot appear in a head")));
            }
        }
        let head_vars = self.head_vars();
        for g in &self.guard {
            if classify_builtin(g) != TermClass::BuiltinAtom {
                return Err(fail(format!("guard `{g}` is not a built-in")));
            }
            if let Some(v) = g.variables().into_iter().find(|v| !head_vars.contains(v)) {
                return Err(fail(format!("guard variable `{v}` does not occur in the head")));
            }
        }
        for b in &self.body {
            if b.functor().is_none() {
                return Err(fail(format!("body element `{b}` is not a constraint")));
            }
        }
        Ok(())
    }
}

fn write_conj(f: &mut fmt::Formatter<'_>, terms: &[Term]) -> fmt::Result {
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @ ", self.name)?;
        if self.removed.is_empty() {
            write_conj(f, &self.kept)?;
            write!(f, " ==> ")?;
        } else {
            if !self.kept.is_empty() {
                write_conj(f, &self.kept)?;
                write!(f, " \\ ")?;
            }
            write_conj(f, &self.removed)?;
            write!(f, " <=> ")?;
        }
        if !self.guard.is_empty() {
            write_conj(f, &self.guard)?;
            write!(f, " | ")?;
        }
        if self.body.is_empty() {
            write!(f, "true")?;
        } else {
            write_conj(f, &self.body)?;
        }
        write!(f, ".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
    signatures: BTreeSet<Signature>,
    by_name: HashMap<Atom, usize>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Result<Self, ProgramError> {
        let mut by_name = HashMap::new();
        let mut signatures = BTreeSet::new();
        for (i, r) in rules.iter().enumerate() {
            r.validate()?;
            if by_name.insert(r.name.clone(), i).is_some() {
                return Err(ProgramError::Validation {
                    rule: r.name.to_string(),
                    message: "duplicate rule name".into(),
                });
            }
            signatures.extend(r.heads().filter_map(Term::signature));
        }
        Ok(Program {
            rules,
            signatures,
            by_name,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.by_name.get(name).map(|&i| &self.rules[i])
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Functor/arity pairs occurring in rule heads.
    pub fn constraint_signatures(&self) -> &BTreeSet<Signature> {
        &self.signatures
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Parses a rule file. Unnamed rules are called `rN` after their position.
pub fn parse_program(source: &str) -> Result<Program, ProgramError> {
    let mut parser = Parser::new(source)?;
    let mut rules = Vec::new();
    while !parser.at_end() {
        let raw = parser.rule()?;
        let name = raw
            .name
            .unwrap_or_else(|| format!("r{}", rules.len() + 1));
        rules.push(Rule {
            name: Atom::from(name),
            kept: raw.kept,
            removed: raw.removed,
            guard: raw.guard,
            body: raw.body,
        });
    }
    Program::new(rules)
}

/// The initial constraints of a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Goal {
    pub constraints: Vec<Term>,
}

impl Goal {
    /// Evaluates arithmetic arguments and checks that every element is a
    /// ground CHR constraint.
    pub fn new(constraints: Vec<Term>) -> Result<Self, QueryError> {
        let constraints = constraints
            .iter()
            .map(|c| {
                if c.functor().is_none() || classify_builtin(c) == TermClass::BuiltinAtom {
                    return Err(QueryError::NotAConstraint(c.clone()));
                }
                Ok(normalize(c)?)
            })
            .collect::<Result<_, _>>()?;
        Ok(Goal { constraints })
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_conj(f, &self.constraints)
    }
}

/// Parses a comma-separated query such as `min(3),min(0),min(2)`.
/// A trailing `.` is allowed.
pub fn parse_query(source: &str) -> Result<Goal, QueryError> {
    let mut parser = Parser::new(source)?;
    if parser.at_end() {
        return Ok(Goal::default());
    }
    let terms = parser.conjunction()?;
    parser.skip_stop();
    parser.expect_end()?;
    Goal::new(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simpagation() {
        let p = parse_program("min(N) \\ min(M) <=> N=<M | true.").unwrap();
        let r = &p.rules()[0];
        assert_eq!(&*r.name, "r1");
        assert_eq!(r.kept, vec![Term::compound("min", vec![Term::var("N")])]);
        assert_eq!(r.removed, vec![Term::compound("min", vec![Term::var("M")])]);
        assert_eq!(
            r.guard,
            vec![Term::compound("=<", vec![Term::var("N"), Term::var("M")])]
        );
        assert!(r.body.is_empty());
    }

    #[test]
    fn parses_named_propagation() {
        let p = parse_program("base @ arc(X,Y,D) ==> path(X,Y,D).").unwrap();
        let r = &p.rules()[0];
        assert_eq!(&*r.name, "base");
        assert_eq!(r.kept.len(), 1);
        assert!(r.removed.is_empty() && r.guard.is_empty());
        assert_eq!(r.body[0].to_string(), "path(X,Y,D)");
    }

    #[test]
    fn parses_simplification_with_numeric_name() {
        let p = parse_program("0 @ findFibo(0) <=> sum(1).\n n @ findFibo(N) <=> N>1 | findFibo(N-1), findFibo(N-2).").unwrap();
        assert_eq!(&*p.rules()[0].name, "0");
        assert!(p.rules()[0].kept.is_empty());
        assert_eq!(p.rules()[1].body[1].to_string(), "findFibo(N-2)");
    }

    #[test]
    fn empty_body_is_a_parse_error() {
        let err = parse_program("p <=> .").unwrap_err();
        let ProgramError::Parse(e) = err else { panic!("{err}") };
        assert_eq!((e.line, e.col), (1, 7));
    }

    #[test]
    fn malformed_inputs_report_positions() {
        for src in ["a(X <=> true.", "a \\ b ==> c.", "a <=> b", "a <=> b | .", "a & b <=> c."] {
            assert!(matches!(parse_program(src), Err(ProgramError::Parse(_))), "{src}");
        }
    }

    #[test]
    fn validation_errors() {
        for src in [
            "a(X) <=> Y > 0 | true.",
            "X <=> true.",
            "r @ a <=> true. r @ b <=> true.",
            "a(X) <=> b(X) | true.",
            "true <=> a.",
            "a <=> 3.",
        ] {
            assert!(
                matches!(parse_program(src), Err(ProgramError::Validation { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn arrow_binds_looser_than_arithmetic() {
        let p = parse_program("A->B \\ A->C <=> A<B, B<C | B->C+1.").unwrap();
        let r = &p.rules()[0];
        assert_eq!(r.kept[0].functor(), Some(("->", 2)));
        let body = &r.body[0];
        assert_eq!(body.functor(), Some(("->", 2)));
        assert_eq!(body.args()[1].functor(), Some(("+", 2)));
    }

    #[test]
    fn lists_and_comments() {
        let p = parse_program(
            "% generate assignments\ngenerate @ f([X|Xs], A) <=> f(Xs,[true(X)|A]), f(Xs,[false(X)|A]). % done",
        )
        .unwrap();
        assert_eq!(p.rules()[0].body[0].to_string(), "f(Xs,[true(X)|A])");
    }

    #[test]
    fn query_examples() {
        let g = parse_query("min(3),min(0),min(2)").unwrap();
        assert_eq!(g.to_string(), "min(3), min(0), min(2)");
        assert_eq!(parse_query("gcd(2+3)").unwrap().constraints, vec![Term::compound("gcd", vec![Term::int(5)])]);
        assert!(matches!(parse_query("min(X)"), Err(QueryError::Eval(EvalError::NonGround(_)))));
        assert!(matches!(parse_query("min(3),"), Err(QueryError::Parse(_))));
        assert!(matches!(parse_query("3 < 4"), Err(QueryError::NotAConstraint(_))));
        assert_eq!(parse_query("0->2, 0->3.").unwrap().len(), 2);
    }

    #[test]
    fn classification() {
        let t = |s: &str| parse_query_term(s);
        assert_eq!(classify_builtin(&t("N=<M")), TermClass::BuiltinAtom);
        assert_eq!(classify_builtin(&t("prime(7)")), TermClass::ChrConstraint);
        assert_eq!(classify_builtin(&t("and(S1,S2,S)")), TermClass::BuiltinAtom);
        assert_eq!(classify_builtin(&t("true")), TermClass::BuiltinAtom);
        assert_eq!(classify_builtin(&t("and(S1,S2)")), TermClass::ChrConstraint);
    }

    fn parse_query_term(s: &str) -> Term {
        Parser::new(s).unwrap().term(1200).unwrap()
    }

    #[test]
    fn printed_program_reparses() {
        let src = "gcd(N) \\ gcd(M) <=> 0<N, N=<M | gcd(M-N).\nx @ a(X) ==> X mod 2=:=0, -X < 3 | b(-(X)), c([1,2|X]), d(1-(-2)).";
        let p = parse_program(src).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
