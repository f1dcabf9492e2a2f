//! Recursive-descent parser with operator-precedence climbing for terms.

use super::lexer::{tokenize, Tok, Token};
use super::ParseError;
use crate::term::{infix_op, Assoc, Term, ARG_PRIORITY, PREFIX_MINUS_PRIORITY};

/// A rule as written, before naming and validation.
pub(crate) struct RawRule {
    pub name: Option<String>,
    pub kept: Vec<Term>,
    pub removed: Vec<Term>,
    pub guard: Vec<Term>,
    pub body: Vec<Term>,
}

const MAX_PRIORITY: u16 = 1200;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        let toks = tokenize(src)?;
        let lines: Vec<&str> = src.split('\n').collect();
        let eof = (lines.len(), lines.last().map_or(0, |l| l.chars().count()) + 1);
        Ok(Parser { toks, pos: 0, eof })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.eof, |t| (t.line, t.col))
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn describe(tok: Option<&Tok>) -> String {
        match tok {
            None => "end of input".into(),
            Some(Tok::Int(v)) => format!("`{v}`"),
            Some(Tok::Name(n)) | Some(Tok::Var(n)) => format!("`{n}`"),
            Some(Tok::Punct(p)) => format!("`{p}`"),
            Some(Tok::Stop) => "`.`".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.error(format!("expected `{p}`, found {}", Self::describe(other)))),
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// The infix operator at the cursor, if any.
    fn peek_infix(&self) -> Option<(&'static str, u16, Assoc)> {
        let name: &'static str = match self.peek()? {
            Tok::Punct(p) => p,
            Tok::Name(n) if n == "mod" => "mod",
            _ => return None,
        };
        let (p, a) = infix_op(name)?;
        Some((name, p, a))
    }

    pub fn term(&mut self, max: u16) -> Result<Term, ParseError> {
        let (mut left, mut left_pri) = self.prefix_term(max)?;
        while let Some((op, p, assoc)) = self.peek_infix() {
            let left_max = if assoc == Assoc::Yfx { p } else { p - 1 };
            if p > max || left_pri > left_max {
                break;
            }
            self.pos += 1;
            let right_max = if assoc == Assoc::Xfy { p } else { p - 1 };
            let right = self.term(right_max)?;
            left = Term::compound(op, vec![left, right]);
            left_pri = p;
        }
        Ok(left)
    }

    fn prefix_term(&mut self, max: u16) -> Result<(Term, u16), ParseError> {
        if matches!(self.peek(), Some(Tok::Punct("-"))) {
            if let Some(Tok::Int(v)) = self.peek_at(1) {
                let v = *v;
                self.pos += 2;
                return Ok((Term::int(-v), 0));
            }
            if max >= PREFIX_MINUS_PRIORITY {
                self.pos += 1;
                let arg = self.term(PREFIX_MINUS_PRIORITY)?;
                return Ok((Term::compound("-", vec![arg]), PREFIX_MINUS_PRIORITY));
            }
        }
        Ok((self.primary()?, 0))
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        let found = self.peek().cloned();
        match found {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Term::int(v))
            }
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(Term::var(&v))
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                if self.eat_punct("(") {
                    let args = self.arg_list(")")?;
                    Ok(Term::compound(&n, args))
                } else {
                    Ok(Term::sym(&n))
                }
            }
            Some(Tok::Punct("(")) => {
                self.pos += 1;
                let t = self.term(MAX_PRIORITY)?;
                self.expect_punct(")")?;
                Ok(t)
            }
            Some(Tok::Punct("[")) => {
                self.pos += 1;
                if self.eat_punct("]") {
                    return Ok(Term::nil());
                }
                let mut items = vec![self.term(ARG_PRIORITY)?];
                while self.eat_punct(",") {
                    items.push(self.term(ARG_PRIORITY)?);
                }
                let tail = if self.eat_punct("|") {
                    self.term(ARG_PRIORITY)?
                } else {
                    Term::nil()
                };
                self.expect_punct("]")?;
                Ok(Term::list_with_tail(items, tail))
            }
            other => Err(self.error(format!("expected a term, found {}", Self::describe(other.as_ref())))),
        }
    }

    fn arg_list(&mut self, close: &str) -> Result<Vec<Term>, ParseError> {
        let mut args = vec![self.term(ARG_PRIORITY)?];
        while self.eat_punct(",") {
            args.push(self.term(ARG_PRIORITY)?);
        }
        self.expect_punct(close)?;
        Ok(args)
    }

    /// `term { "," term }`
    pub fn conjunction(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut items = vec![self.term(ARG_PRIORITY)?];
        while self.eat_punct(",") {
            items.push(self.term(ARG_PRIORITY)?);
        }
        Ok(items)
    }

    pub fn rule(&mut self) -> Result<RawRule, ParseError> {
        let name = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Name(n)), Some(Tok::Punct("@"))) => Some(n.clone()),
            (Some(Tok::Int(v)), Some(Tok::Punct("@"))) => Some(v.to_string()),
            _ => None,
        };
        if name.is_some() {
            self.pos += 2;
        }

        let first = self.conjunction()?;
        let (kept, removed) = if self.eat_punct("\\") {
            let removed = self.conjunction()?;
            if !self.eat_punct("<=>") {
                return Err(self.error("a `\\` head must be followed by `<=>`"));
            }
            (first, removed)
        } else if self.eat_punct("<=>") {
            (Vec::new(), first)
        } else if self.eat_punct("==>") {
            (first, Vec::new())
        } else {
            return Err(self.error(format!(
                "expected `<=>`, `==>` or `\\`, found {}",
                Self::describe(self.peek())
            )));
        };

        let mut guard = Vec::new();
        let mut body = self.conjunction()?;
        if self.eat_punct("|") {
            guard = body;
            body = self.conjunction()?;
        }
        if body.len() == 1 && body[0] == Term::sym("true") {
            body.clear();
        }
        match self.next() {
            Some(Tok::Stop) => {}
            other => {
                self.pos -= 1;
                return Err(self.error(format!("expected `.`, found {}", Self::describe(other.as_ref()))));
            }
        }
        Ok(RawRule {
            name,
            kept,
            removed,
            guard,
            body,
        })
    }

    pub fn skip_stop(&mut self) {
        if matches!(self.peek(), Some(Tok::Stop)) {
            self.pos += 1;
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected {}", Self::describe(self.peek()))))
        }
    }
}
