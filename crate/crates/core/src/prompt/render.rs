use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::retrieval::LemmaKind;

use super::{
    AgentPrompt, CharEstimator, PromptBundle, Section, StepOutcome, SystemPromptKind,
    TokenEstimator, KEYWORDS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("prompt bundle has an empty stack")]
    EmptyStack,
    #[error("current state is an error state")]
    ErrorState,
    #[error("token budget {budget} is below the {needed} tokens needed for the goals")]
    BudgetTooSmall { budget: usize, needed: usize },
}

/// Breaks up reserved keywords inside payload text so the rendered prompt
/// stays unambiguous: `[GOAL]` becomes `[ GOAL]`.
pub fn sanitize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('[') {
        out.push_str(&rest[..=i]);
        rest = &rest[i + 1..];
        if KEYWORDS
            .iter()
            .any(|k| rest.starts_with(k) && rest[k.len()..].starts_with(']'))
        {
            out.push(' ');
        }
    }
    out.push_str(rest);
    out
}

/// Single-line payloads: keywords broken up and line breaks flattened.
pub fn sanitize_inline(text: &str) -> String {
    sanitize_text(&text.replace(['\r', '\n'], " "))
}

fn render(bundle: &PromptBundle, dropped: &BTreeSet<Section>) -> String {
    let keep = |s: Section| !dropped.contains(&s);
    let current = bundle.current().expect("checked by caller");
    let mut out = String::from("[GOALS]\n");
    for (i, ob) in current.obligations().iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(out, "[GOAL] {n}\n{}", sanitize_inline(ob.goal()));
        let hyps: Vec<_> = ob.hypotheses().collect();
        if !hyps.is_empty() {
            let _ = writeln!(out, "[HYPOTHESES] {n}");
            for (name, prop) in hyps {
                let _ = writeln!(
                    out,
                    "[HYPOTHESIS] {}",
                    sanitize_inline(&format!("{name} : {prop}"))
                );
            }
        }
        if n == 1 && keep(Section::Retrieved) {
            if let Some(rho) = &bundle.retrieved {
                for (kind, block, item) in [
                    (LemmaKind::Definition, "DEFINITIONS", "DEFINITION"),
                    (LemmaKind::Lemma, "THEOREMS", "THEOREM"),
                ] {
                    let items: Vec<_> = rho.of_kind(kind).collect();
                    if items.is_empty() {
                        continue;
                    }
                    let _ = writeln!(out, "[{block}] {n}");
                    for r in items {
                        let _ = writeln!(
                            out,
                            "[{item}] {}",
                            sanitize_inline(&format!("{} : {}", r.name, r.statement))
                        );
                    }
                }
            }
        }
    }
    if keep(Section::InformalProof) {
        if let Some(sketch) = bundle
            .context
            .as_ref()
            .and_then(|c| c.informal_hints.as_deref())
        {
            let _ = writeln!(out, "[INFORMAL PROOF]\n{}", sanitize_text(sketch));
        }
    }
    if keep(Section::Steps) && !bundle.steps.is_empty() {
        out.push_str("[STEPS]");
        for s in &bundle.steps {
            let _ = write!(out, "[STEP]{}", sanitize_inline(s.as_str()));
        }
        out.push('\n');
    }
    if keep(Section::IncorrectSteps) {
        let mut seen = BTreeSet::new();
        let bad: Vec<_> = bundle.bad.iter().filter(|t| seen.insert(*t)).collect();
        if !bad.is_empty() {
            out.push_str("[INCORRECT STEPS]");
            for t in bad {
                let _ = write!(out, "[STEP]{}", sanitize_inline(t.as_str()));
            }
            out.push('\n');
        }
    }
    if keep(Section::LastStep) {
        if let Some(last) = &bundle.last_step {
            let _ = write!(out, "[LAST STEP]{}", sanitize_inline(last.tactic.as_str()));
            match &last.outcome {
                StepOutcome::Success => out.push_str("[SUCCESS]\n"),
                StepOutcome::Error(msg) => {
                    let _ = writeln!(out, "\n[ERROR MESSAGE]{}", sanitize_text(msg));
                }
            }
        }
    }
    if keep(Section::FormatError) {
        if let Some(fe) = &bundle.format_error {
            let _ = writeln!(out, "[ERROR]{}[END]", sanitize_text(&fe.repair_body()));
        }
    }
    out
}

/// Renders the agent prompt, dropping optional sections in
/// [`Section::DROP_ORDER`] until the estimate fits `token_budget`.
pub fn promptify_with(
    bundle: &PromptBundle,
    token_budget: usize,
    estimator: &dyn TokenEstimator,
    system: SystemPromptKind,
) -> Result<AgentPrompt, PromptError> {
    let current = bundle.current().ok_or(PromptError::EmptyStack)?;
    if current.is_error() {
        return Err(PromptError::ErrorState);
    }
    let mut dropped = BTreeSet::new();
    let mut agent = render(bundle, &dropped);
    let mut tokens = estimator.estimate(&agent);
    let mut order = Section::DROP_ORDER.iter();
    while tokens > token_budget {
        let Some(next) = order.next() else {
            return Err(PromptError::BudgetTooSmall {
                budget: token_budget,
                needed: tokens,
            });
        };
        dropped.insert(*next);
        agent = render(bundle, &dropped);
        tokens = estimator.estimate(&agent);
    }
    Ok(AgentPrompt {
        system: system.text().to_string(),
        agent,
        tokens,
        dropped: Section::DROP_ORDER
            .iter()
            .copied()
            .filter(|s| dropped.contains(s))
            .collect(),
    })
}

pub fn promptify(bundle: &PromptBundle, token_budget: usize) -> Result<AgentPrompt, PromptError> {
    promptify_with(
        bundle,
        token_budget,
        &CharEstimator,
        SystemPromptKind::LeanStyle,
    )
}
