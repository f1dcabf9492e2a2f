//! Built-in constraints: integer arithmetic, comparisons, structural
//! (dis)equality, list membership and the boolean truth tables.

use super::{substitute, Binding, Term, CONS, NIL};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(Term),
    #[error("`mod` requires a positive right operand in `{0}`")]
    NonPositiveModulus(Term),
    #[error("integer overflow in `{0}`")]
    Overflow(Term),
    #[error("`{0}` is not an arithmetic expression")]
    NotArithmetic(Term),
    #[error("`{0}` is not ground")]
    NonGround(Term),
    #[error("`{0}` is not a list")]
    NotAList(Term),
    #[error("`{0}` is not a boolean (true/false)")]
    NotABoolean(Term),
    #[error("unknown built-in `{0}`")]
    UnknownBuiltin(Term),
    #[error("body check `{0}` does not hold")]
    BodyCheckFailed(Term),
}

/// Built-in predicate families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// `=<`, `<`, `>`, `>=`, `=:=`, `=\=` over evaluated operands.
    Comparison,
    /// `=` and `\=` on ground terms.
    Structural,
    Member,
    /// `neg/2`, `and/3`, `or/3`: the last argument is an output.
    Boolean,
    True,
}

/// Looks a functor up in the fixed built-in table.
pub fn builtin_kind(name: &str, arity: usize) -> Option<BuiltinKind> {
    match (name, arity) {
        ("=<" | "<" | ">" | ">=" | "=:=" | "=\\=", 2) => Some(BuiltinKind::Comparison),
        ("=" | "\\=", 2) => Some(BuiltinKind::Structural),
        ("member", 2) => Some(BuiltinKind::Member),
        ("neg", 2) | ("and", 3) | ("or", 3) => Some(BuiltinKind::Boolean),
        ("true", 0) => Some(BuiltinKind::True),
        _ => None,
    }
}

/// True for the arithmetic functors `+ - * // mod` and unary `-`.
pub fn is_arithmetic(name: &str, arity: usize) -> bool {
    matches!(
        (name, arity),
        ("+" | "-" | "*" | "//" | "mod", 2) | ("-", 1)
    )
}

/// Evaluates a ground integer expression.
pub fn eval_ground(expr: &Term) -> Result<i64, EvalError> {
    match expr {
        Term::Int(v) => Ok(*v),
        Term::Var(_) => Err(EvalError::NonGround(expr.clone())),
        Term::Compound(f, args) if args.len() == 1 && &**f == "-" => eval_ground(&args[0])?
            .checked_neg()
            .ok_or_else(|| EvalError::Overflow(expr.clone())),
        Term::Compound(f, args) if args.len() == 2 && is_arithmetic(f, 2) => {
            let a = eval_ground(&args[0])?;
            let b = eval_ground(&args[1])?;
            let overflow = || EvalError::Overflow(expr.clone());
            match &**f {
                "+" => a.checked_add(b).ok_or_else(overflow),
                "-" => a.checked_sub(b).ok_or_else(overflow),
                "*" => a.checked_mul(b).ok_or_else(overflow),
                "//" if b == 0 => Err(EvalError::DivisionByZero(expr.clone())),
                "//" => a.checked_div(b).ok_or_else(overflow),
                "mod" if b <= 0 => Err(EvalError::NonPositiveModulus(expr.clone())),
                "mod" => Ok(a.rem_euclid(b)),
                _ => unreachable!("is_arithmetic admitted {f}"),
            }
        }
        _ => Err(EvalError::NotArithmetic(expr.clone())),
    }
}

/// Like [`eval_ground`] on `substitute(expr, env)`, without building the
/// substituted term. Any failure is reported as `None`.
fn eval_in(expr: &Term, env: &Binding) -> Option<i64> {
    match expr {
        Term::Int(v) => Some(*v),
        Term::Var(v) => eval_in(env.get(v)?, env),
        Term::Compound(f, args) if args.len() == 1 && &**f == "-" => eval_in(&args[0], env)?.checked_neg(),
        Term::Compound(f, args) if args.len() == 2 && is_arithmetic(f, 2) => {
            let a = eval_in(&args[0], env)?;
            let b = eval_in(&args[1], env)?;
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
        _ => None,
    }
}

/// Whether guard atom `g` holds under `env`; evaluation errors count as
/// failure.
pub fn guard_holds_in(g: &Term, env: &Binding) -> bool {
    if let Term::Compound(f, args) = g {
        if args.len() == 2 && builtin_kind(f, 2) == Some(BuiltinKind::Comparison) {
            let (Some(a), Some(b)) = (eval_in(&args[0], env), eval_in(&args[1], env)) else {
                return false;
            };
            return match &**f {
                "=<" => a <= b,
                "<" => a < b,
                ">" => a > b,
                ">=" => a >= b,
                "=:=" => a == b,
                _ => a != b,
            };
        }
    }
    eval_guard_atom(&substitute(g, env)).unwrap_or(false)
}

/// Evaluates every arithmetic subterm to an integer and leaves the rest
/// of the structure alone. Fails on variables.
pub fn normalize(t: &Term) -> Result<Term, EvalError> {
    match t {
        Term::Int(_) | Term::Sym(_) => Ok(t.clone()),
        Term::Var(_) => Err(EvalError::NonGround(t.clone())),
        Term::Compound(f, args) if is_arithmetic(f, args.len()) => Ok(Term::Int(eval_ground(t)?)),
        Term::Compound(f, args) => Ok(Term::Compound(
            f.clone(),
            args.iter().map(normalize).collect::<Result<_, _>>()?,
        )),
    }
}

/// Truth value of a ground guard atom.
pub fn eval_guard_atom(g: &Term) -> Result<bool, EvalError> {
    let (name, arity) = g
        .functor()
        .ok_or_else(|| EvalError::UnknownBuiltin(g.clone()))?;
    let args = g.args();
    match builtin_kind(name, arity) {
        Some(BuiltinKind::True) => Ok(true),
        Some(BuiltinKind::Comparison) => {
            let a = eval_ground(&args[0])?;
            let b = eval_ground(&args[1])?;
            Ok(match name {
                "=<" => a <= b,
                "<" => a < b,
                ">" => a > b,
                ">=" => a >= b,
                "=:=" => a == b,
                _ => a != b,
            })
        }
        Some(BuiltinKind::Structural) => {
            for a in args {
                if !a.is_ground() {
                    return Err(EvalError::NonGround(a.clone()));
                }
            }
            let equal = args[0] == args[1];
            Ok(if name == "=" { equal } else { !equal })
        }
        Some(BuiltinKind::Member) => {
            if !g.is_ground() {
                return Err(EvalError::NonGround(g.clone()));
            }
            member(&args[0], &args[1])
        }
        Some(BuiltinKind::Boolean) | None => Err(EvalError::UnknownBuiltin(g.clone())),
    }
}

fn member(item: &Term, list: &Term) -> Result<bool, EvalError> {
    let mut cur = list;
    loop {
        match cur {
            Term::Sym(s) if &**s == NIL => return Ok(false),
            Term::Compound(f, args) if &**f == CONS && args.len() == 2 => {
                if args[0] == *item {
                    return Ok(true);
                }
                cur = &args[1];
            }
            _ => return Err(EvalError::NotAList(list.clone())),
        }
    }
}

fn as_bool(t: &Term) -> Result<bool, EvalError> {
    match t.as_sym() {
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        _ if !t.is_ground() => Err(EvalError::NonGround(t.clone())),
        _ => Err(EvalError::NotABoolean(t.clone())),
    }
}

fn bool_term(v: bool) -> Term {
    Term::sym(if v { "true" } else { "false" })
}

/// Executes a built-in in a rule body under `env`.
///
/// The boolean tables bind their output variable; an output that is already
/// bound is checked instead. Guard-style atoms must hold.
pub fn eval_body_builtin(b: &Term, env: &mut Binding) -> Result<(), EvalError> {
    let (name, arity) = b
        .functor()
        .ok_or_else(|| EvalError::UnknownBuiltin(b.clone()))?;
    match builtin_kind(name, arity) {
        Some(BuiltinKind::Boolean) => {
            let args = b.args();
            let inputs: Vec<bool> = args[..arity - 1]
                .iter()
                .map(|a| as_bool(&substitute(a, env)))
                .collect::<Result<_, _>>()?;
            let value = match name {
                "neg" => !inputs[0],
                "and" => inputs[0] && inputs[1],
                _ => inputs[0] || inputs[1],
            };
            let out = substitute(&args[arity - 1], env);
            match out {
                Term::Var(v) => {
                    env.bind(v, bool_term(value))
                        .expect("unbound output variable cannot conflict");
                    Ok(())
                }
                ref t if !t.is_ground() => Err(EvalError::NonGround(t.clone())),
                t if as_bool(&t)? == value => Ok(()),
                _ => Err(EvalError::BodyCheckFailed(substitute(b, env))),
            }
        }
        Some(_) => {
            let g = substitute(b, env);
            if eval_guard_atom(&g)? {
                Ok(())
            } else {
                Err(EvalError::BodyCheckFailed(g))
            }
        }
        None => Err(EvalError::UnknownBuiltin(b.clone())),
    }
}
