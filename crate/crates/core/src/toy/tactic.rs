//! Surface syntax of toy tactics.
//!
//! ```text
//! tactic := "intro" NAME | "split" | "assumption" | "exact" NAME | "refl"
//!         | "rw" ("←" | "<-")? NAME | "apply" NAME
//! ```
//!
//! A single trailing `,` is accepted and ignored, so Lean-style steps such as
//! `intro h,` parse as well.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use super::term::{is_ident_char, is_ident_start};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ToyTactic {
    Intro(String),
    Split,
    Assumption,
    Exact(String),
    Refl,
    Rw(String, Direction),
    Apply(String),
}

pub const KEYWORDS: [&str; 7] = [
    "intro",
    "split",
    "assumption",
    "exact",
    "refl",
    "rw",
    "apply",
];

impl ToyTactic {
    /// Enumeration rank used by the brute-force oracle. `assumption` comes
    /// last: every successful `assumption` has an `exact` twin.
    fn rank(&self) -> u8 {
        match self {
            ToyTactic::Intro(_) => 0,
            ToyTactic::Split => 1,
            ToyTactic::Exact(_) => 2,
            ToyTactic::Refl => 3,
            ToyTactic::Rw(..) => 4,
            ToyTactic::Apply(_) => 5,
            ToyTactic::Assumption => 6,
        }
    }

    fn sort_fields(&self) -> (u8, &str, Option<Direction>) {
        match self {
            ToyTactic::Intro(n) | ToyTactic::Exact(n) | ToyTactic::Apply(n) => {
                (self.rank(), n, None)
            }
            ToyTactic::Rw(n, d) => (self.rank(), n, Some(*d)),
            _ => (self.rank(), "", None),
        }
    }
}

impl Ord for ToyTactic {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_fields().cmp(&other.sort_fields())
    }
}

impl PartialOrd for ToyTactic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ToyTactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToyTactic::Intro(n) => write!(f, "intro {n}"),
            ToyTactic::Split => f.write_str("split"),
            ToyTactic::Assumption => f.write_str("assumption"),
            ToyTactic::Exact(n) => write!(f, "exact {n}"),
            ToyTactic::Refl => f.write_str("refl"),
            ToyTactic::Rw(n, Direction::LeftToRight) => write!(f, "rw {n}"),
            ToyTactic::Rw(n, Direction::RightToLeft) => write!(f, "rw ← {n}"),
            ToyTactic::Apply(n) => write!(f, "apply {n}"),
        }
    }
}

/// Tactic parse failure. The display form is what the toy environment
/// reports as error feedback.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at column {column}: {message}; expected {expected}")]
pub struct TacticParseError {
    /// 1-based character column in the trimmed input.
    pub column: usize,
    pub message: String,
    pub expected: String,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn ident(&mut self) -> Option<String> {
        if self.at_end() || !is_ident_start(self.chars[self.pos]) {
            return None;
        }
        let start = self.pos;
        while self.pos < self.chars.len() && is_ident_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn eat_str(&mut self, s: &str) -> bool {
        let want: Vec<char> = s.chars().collect();
        if self.chars[self.pos..].starts_with(&want) {
            self.pos += want.len();
            true
        } else {
            false
        }
    }

    fn err(&self, message: impl Into<String>, expected: impl Into<String>) -> TacticParseError {
        TacticParseError {
            column: self.pos + 1,
            message: message.into(),
            expected: expected.into(),
        }
    }
}

pub fn parse_toy_tactic(text: &str) -> Result<ToyTactic, TacticParseError> {
    let mut body = text.trim();
    if let Some(stripped) = body.strip_suffix(',') {
        body = stripped.trim_end();
    }
    let mut c = Cursor {
        chars: body.chars().collect(),
        pos: 0,
    };
    let expected_kw = format!("one of {}", KEYWORDS.join(", "));
    let Some(kw) = c.ident() else {
        return Err(c.err("unknown tactic", expected_kw));
    };
    let needs_name = |c: &mut Cursor| -> Result<String, TacticParseError> {
        let before = c.pos;
        c.skip_ws();
        if c.pos == before && !c.at_end() {
            return Err(c.err("missing space before name", "whitespace"));
        }
        c.ident()
            .ok_or_else(|| c.err(format!("'{kw}' needs a name"), "identifier"))
    };
    let tac = match kw.as_str() {
        "intro" => ToyTactic::Intro(needs_name(&mut c)?),
        "exact" => ToyTactic::Exact(needs_name(&mut c)?),
        "apply" => ToyTactic::Apply(needs_name(&mut c)?),
        "split" => ToyTactic::Split,
        "assumption" => ToyTactic::Assumption,
        "refl" => ToyTactic::Refl,
        "rw" => {
            c.skip_ws();
            let dir = if c.eat_str("←") || c.eat_str("<-") {
                Direction::RightToLeft
            } else {
                Direction::LeftToRight
            };
            c.skip_ws();
            let name = c
                .ident()
                .ok_or_else(|| c.err("'rw' needs an equation name", "identifier"))?;
            ToyTactic::Rw(name, dir)
        }
        other => {
            return Err(TacticParseError {
                column: 1,
                message: format!("unknown tactic '{other}'"),
                expected: expected_kw,
            })
        }
    };
    c.skip_ws();
    if !c.at_end() {
        return Err(c.err("unexpected trailing input", "end of tactic"));
    }
    Ok(tac)
}
