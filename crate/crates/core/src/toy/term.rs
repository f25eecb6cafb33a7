//! Propositions and arithmetic expressions of the toy prover.
//!
//! Surface syntax (ASCII forms are canonical, Unicode forms are accepted):
//!
//! ```text
//! term    := conj ( ("->" | "→") term )?
//! conj    := unary ( ("/\" | "∧") conj )?
//! unary   := expr "=" expr | "(" term ")" | ATOM
//! expr    := prod ( "+" prod )*
//! prod    := primary ( "*" primary )*
//! primary := VAR | INT | "(" expr ")"
//! ```
//!
//! `ATOM` identifiers start with an uppercase letter, `VAR` identifiers with
//! anything else alphabetic or `_`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(String),
    Const(u64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Atom(String),
    Implies(Box<Term>, Box<Term>),
    And(Box<Term>, Box<Term>),
    Eq(Expr, Expr),
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    /// Replaces every occurrence of `from` (outermost first, no re-scan of
    /// the replacement) and returns the rewritten expression with the count.
    pub fn replace(&self, from: &Expr, to: &Expr) -> (Expr, usize) {
        if self == from {
            return (to.clone(), 1);
        }
        match self {
            Expr::Var(_) | Expr::Const(_) => (self.clone(), 0),
            Expr::Add(a, b) => {
                let (a, n) = a.replace(from, to);
                let (b, m) = b.replace(from, to);
                (Expr::Add(Box::new(a), Box::new(b)), n + m)
            }
            Expr::Mul(a, b) => {
                let (a, n) = a.replace(from, to);
                let (b, m) = b.replace(from, to);
                (Expr::Mul(Box::new(a), Box::new(b)), n + m)
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) => 0,
            Expr::Mul(..) => 1,
            Expr::Var(_) | Expr::Const(_) => 2,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Var(v) => f.write_str(v),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => {
                a.fmt_prec(f, 0)?;
                f.write_str(" + ")?;
                b.fmt_prec(f, 1)
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" * ")?;
                b.fmt_prec(f, 2)
            }
        }
    }
}

impl Term {
    pub fn atom(name: &str) -> Self {
        Term::Atom(name.to_string())
    }

    pub fn implies(a: Term, b: Term) -> Self {
        Term::Implies(Box::new(a), Box::new(b))
    }

    pub fn and(a: Term, b: Term) -> Self {
        Term::And(Box::new(a), Box::new(b))
    }

    pub fn parse(text: &str) -> Result<Term, TermParseError> {
        let tokens = lex(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let t = p.term()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("end of input"));
        }
        Ok(t)
    }

    /// Rewrites every occurrence of `from` inside equality sides.
    pub fn rewrite(&self, from: &Expr, to: &Expr) -> (Term, usize) {
        match self {
            Term::Atom(_) => (self.clone(), 0),
            Term::Implies(a, b) => {
                let (a, n) = a.rewrite(from, to);
                let (b, m) = b.rewrite(from, to);
                (Term::implies(a, b), n + m)
            }
            Term::And(a, b) => {
                let (a, n) = a.rewrite(from, to);
                let (b, m) = b.rewrite(from, to);
                (Term::and(a, b), n + m)
            }
            Term::Eq(l, r) => {
                let (l, n) = l.replace(from, to);
                let (r, m) = r.replace(from, to);
                (Term::Eq(l, r), n + m)
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Term::Implies(..) => 0,
            Term::And(..) => 1,
            Term::Atom(_) | Term::Eq(..) => 2,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Implies(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 0)
            }
            Term::And(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" /\\ ")?;
                b.fmt_prec(f, 1)
            }
            Term::Eq(l, r) => write!(f, "{l} = {r}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Term {
    type Err = TermParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("term parse error at offset {offset}: expected {expected}, found {found}")]
pub struct TermParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    LParen,
    RParen,
    Arrow,
    Wedge,
    Equals,
    Plus,
    Star,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Int(n) => write!(f, "'{n}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Arrow => f.write_str("'->'"),
            Tok::Wedge => f.write_str("'/\\'"),
            Tok::Equals => f.write_str("'='"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Star => f.write_str("'*'"),
        }
    }
}

pub(crate) fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, TermParseError> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let tok = match c {
            '(' => {
                it.next();
                Tok::LParen
            }
            ')' => {
                it.next();
                Tok::RParen
            }
            '=' => {
                it.next();
                Tok::Equals
            }
            '+' => {
                it.next();
                Tok::Plus
            }
            '*' => {
                it.next();
                Tok::Star
            }
            '→' => {
                it.next();
                Tok::Arrow
            }
            '∧' => {
                it.next();
                Tok::Wedge
            }
            '-' | '/' => {
                it.next();
                let want = if c == '-' { '>' } else { '\\' };
                match it.next() {
                    Some((_, n)) if n == want => {
                        if c == '-' {
                            Tok::Arrow
                        } else {
                            Tok::Wedge
                        }
                    }
                    _ => {
                        return Err(TermParseError {
                            offset: i,
                            expected: if c == '-' {
                                "'->'".into()
                            } else {
                                "'/\\'".into()
                            },
                            found: format!("'{c}'"),
                        })
                    }
                }
            }
            d if d.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&(_, d)) = it.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                Tok::Int(s.parse().map_err(|_| TermParseError {
                    offset: i,
                    expected: "integer literal".into(),
                    found: s.clone(),
                })?)
            }
            c if is_ident_start(c) => {
                let mut s = String::new();
                while let Some(&(_, d)) = it.peek() {
                    if is_ident_char(d) {
                        s.push(d);
                        it.next();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => {
                return Err(TermParseError {
                    offset: i,
                    expected: "term".into(),
                    found: format!("'{other}'"),
                })
            }
        };
        out.push((i, tok));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &str) -> TermParseError {
        match self.tokens.get(self.pos) {
            Some((off, t)) => TermParseError {
                offset: *off,
                expected: expected.into(),
                found: t.to_string(),
            },
            None => TermParseError {
                offset: self.tokens.last().map_or(0, |(o, _)| o + 1),
                expected: expected.into(),
                found: "end of input".into(),
            },
        }
    }

    fn term(&mut self) -> Result<Term, TermParseError> {
        let lhs = self.conj()?;
        if self.eat(&Tok::Arrow) {
            let rhs = self.term()?;
            return Ok(Term::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Term, TermParseError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Wedge) {
            let rhs = self.conj()?;
            return Ok(Term::and(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Term, TermParseError> {
        let save = self.pos;
        if let Ok(l) = self.expr() {
            if self.eat(&Tok::Equals) {
                let r = self.expr()?;
                return Ok(Term::Eq(l, r));
            }
        }
        self.pos = save;
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("')'"));
                }
                Ok(t)
            }
            Some(Tok::Ident(name)) if name.starts_with(|c: char| c.is_uppercase()) => {
                self.pos += 1;
                Ok(Term::Atom(name))
            }
            _ => Err(self.error("proposition")),
        }
    }

    fn expr(&mut self) -> Result<Expr, TermParseError> {
        let mut lhs = self.prod()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.prod()?;
            lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prod(&mut self) -> Result<Expr, TermParseError> {
        let mut lhs = self.primary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.primary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, TermParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::Const(n))
            }
            Some(Tok::Ident(name)) if !name.starts_with(|c: char| c.is_uppercase()) => {
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("')'"));
                }
                Ok(e)
            }
            _ => Err(self.error("expression")),
        }
    }
}
