use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Int(i64),
    /// Lower-case identifier (or `$`-prefixed generated identifier).
    Name(String),
    Var(String),
    Punct(&'static str),
    /// End-of-clause `.`
    Stop,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// longest first
const PUNCT: &[&str] = &[
    "<=>", "==>", "=:=", "=\\=", "=<", ">=", "\\=", "->", "//", "=", "<", ">", "+", "-", "*",
    "\\", "@", "|", ",", "(", ")", "[", "]",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });

        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let v = text.parse::<i64>().map_err(|_| ParseError {
                line: tl,
                col: tc,
                message: format!("integer literal `{text}` out of range"),
            })?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if c.is_uppercase() || c == '_' {
                Tok::Var(text)
            } else {
                Tok::Name(text)
            };
            push(&mut out, tok);
            continue;
        }
        if c == '.' {
            let next = chars.get(i + 1);
            if next.is_none_or(|n| n.is_whitespace() || *n == '%') {
                advance(&mut i, &mut line, &mut col, 1);
                push(&mut out, Tok::Stop);
                continue;
            }
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, p.len());
                push(&mut out, Tok::Punct(p));
            }
            None => {
                return Err(ParseError {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}
