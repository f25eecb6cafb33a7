//! Reference checker for rendered agent prompts.

use thiserror::Error;

use super::KEYWORDS;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("agent prompt violates grammar at token {index}: {message}")]
pub struct GrammarError {
    pub index: usize,
    pub message: String,
}

struct Tok<'a> {
    kw: &'a str,
    payload: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<Tok<'_>>, GrammarError> {
    let mut marks = Vec::new();
    let mut i = 0;
    while let Some(off) = text[i..].find('[') {
        let at = i + off;
        let rest = &text[at + 1..];
        let hit = KEYWORDS
            .iter()
            .find(|k| rest.starts_with(**k) && rest[k.len()..].starts_with(']'));
        match hit {
            Some(k) => {
                marks.push((at, *k));
                i = at + k.len() + 2;
            }
            None => i = at + 1,
        }
    }
    if marks.first().map(|m| m.0) != Some(0) {
        return Err(GrammarError {
            index: 0,
            message: "prompt must start with a keyword".into(),
        });
    }
    Ok(marks
        .iter()
        .enumerate()
        .map(|(n, &(at, kw))| {
            let start = at + kw.len() + 2;
            let end = marks.get(n + 1).map_or(text.len(), |m| m.0);
            Tok {
                kw,
                payload: &text[start..end],
            }
        })
        .collect())
}

struct Checker<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
}

impl<'a> Checker<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T, GrammarError> {
        Err(GrammarError {
            index: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.kw)
    }

    fn take(&mut self, kw: &str) -> Result<&'a str, GrammarError> {
        match self.toks.get(self.pos) {
            Some(t) if t.kw == kw => {
                self.pos += 1;
                Ok(t.payload)
            }
            Some(t) => self.fail(format!("expected [{kw}], found [{}]", t.kw)),
            None => self.fail(format!("expected [{kw}], found end of prompt")),
        }
    }

    /// `" <n>\n"` header payloads.
    fn index_header(&mut self, kw: &str, want: usize) -> Result<(), GrammarError> {
        let p = self.take(kw)?;
        if p != format!(" {want}\n") {
            return self.fail(format!("[{kw}] must carry index {want}"));
        }
        Ok(())
    }

    fn line_item(&mut self, kw: &str) -> Result<(), GrammarError> {
        let p = self.take(kw)?;
        match p.strip_prefix(' ').and_then(|s| s.strip_suffix('\n')) {
            Some(body) if !body.is_empty() && !body.contains('\n') => Ok(()),
            _ => self.fail(format!("[{kw}] item must be a single non-empty line")),
        }
    }

    fn item_block(&mut self, block: &str, item: &str, n: usize) -> Result<(), GrammarError> {
        if self.peek() != Some(block) {
            return Ok(());
        }
        self.index_header(block, n)?;
        self.line_item(item)?;
        while self.peek() == Some(item) {
            self.line_item(item)?;
        }
        Ok(())
    }

    fn goal(&mut self, n: usize) -> Result<(), GrammarError> {
        let p = self.take("GOAL")?;
        let Some(rest) = p.strip_prefix(&format!(" {n}\n")) else {
            return self.fail(format!("[GOAL] must carry index {n}"));
        };
        match rest.strip_suffix('\n') {
            Some(g) if !g.is_empty() && !g.contains('\n') => {}
            _ => return self.fail("goal text must be a single non-empty line"),
        }
        self.item_block("HYPOTHESES", "HYPOTHESIS", n)?;
        self.item_block("DEFINITIONS", "DEFINITION", n)?;
        self.item_block("THEOREMS", "THEOREM", n)
    }

    fn step_list(&mut self, kw: &str) -> Result<(), GrammarError> {
        if !self.take(kw)?.is_empty() {
            return self.fail(format!("[{kw}] must be followed directly by [STEP]"));
        }
        loop {
            let p = self.take("STEP")?;
            let last = self.peek() != Some("STEP");
            let body = if last { p.strip_suffix('\n') } else { Some(p) };
            match body {
                Some(b) if !b.is_empty() && !b.contains('\n') => {}
                _ => return self.fail("malformed [STEP] entry"),
            }
            if last {
                return Ok(());
            }
        }
    }

    fn prompt(&mut self) -> Result<(), GrammarError> {
        if self.take("GOALS")? != "\n" {
            return self.fail("[GOALS] must be followed by a newline");
        }
        let mut n = 1;
        self.goal(n)?;
        while self.peek() == Some("GOAL") {
            n += 1;
            self.goal(n)?;
        }
        if self.peek() == Some("INFORMAL PROOF") {
            let p = self.take("INFORMAL PROOF")?;
            if !(p.starts_with('\n') && p.ends_with('\n') && p.len() > 2) {
                return self.fail("[INFORMAL PROOF] body must sit on its own lines");
            }
        }
        if self.peek() == Some("STEPS") {
            self.step_list("STEPS")?;
        }
        if self.peek() == Some("INCORRECT STEPS") {
            self.step_list("INCORRECT STEPS")?;
        }
        if self.peek() == Some("LAST STEP") {
            let p = self.take("LAST STEP")?;
            match self.peek() {
                Some("SUCCESS") => {
                    if p.is_empty() || p.contains('\n') {
                        return self.fail("malformed [LAST STEP] tactic");
                    }
                    if self.take("SUCCESS")? != "\n" {
                        return self.fail("[SUCCESS] must end its line");
                    }
                }
                Some("ERROR MESSAGE") => {
                    match p.strip_suffix('\n') {
                        Some(t) if !t.is_empty() && !t.contains('\n') => {}
                        _ => return self.fail("malformed [LAST STEP] tactic"),
                    }
                    if !self.take("ERROR MESSAGE")?.ends_with('\n') {
                        return self.fail("[ERROR MESSAGE] must end with a newline");
                    }
                }
                _ => return self.fail("[LAST STEP] needs [SUCCESS] or [ERROR MESSAGE]"),
            }
        }
        if self.peek() == Some("ERROR") {
            self.take("ERROR")?;
            if self.take("END")? != "\n" {
                return self.fail("[END] must close the prompt");
            }
        }
        match self.peek() {
            None => Ok(()),
            Some(kw) => self.fail(format!("unexpected [{kw}]")),
        }
    }
}

/// Validates a rendered agent prompt against the section grammar.
pub fn check_agent_prompt(text: &str) -> Result<(), GrammarError> {
    let toks = tokenize(text)?;
    Checker { toks, pos: 0 }.prompt()
}
