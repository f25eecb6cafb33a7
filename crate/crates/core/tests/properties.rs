use proptest::prelude::*;
use tacsearch::prompt::{check_agent_prompt, promptify, PromptBundle, PromptError};
use tacsearch::proof::{at_least_as_hard, Obligation, ProofState, Tactic};
use tacsearch::retrieval::{LemmaKind, LemmaRecord, RetrievalIndex};

fn obligation() -> impl Strategy<Value = Obligation> {
    (
        prop::sample::select(vec!["P", "Q", "a = b"]),
        prop::collection::vec(prop::sample::select(vec!["A", "B", "C"]), 0..4),
    )
        .prop_map(|(goal, props)| {
            let hyps = props
                .into_iter()
                .enumerate()
                .map(|(i, p)| (format!("h{i}"), p.to_string()));
            Obligation::with_hypotheses(goal, hyps).unwrap()
        })
}

fn state() -> impl Strategy<Value = ProofState> {
    prop::collection::vec(obligation(), 0..4).prop_map(ProofState::Obligations)
}

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec!["gcd", "lcm", "add", "zero", "x", "y", "Nat"]),
        0..8,
    )
    .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn harder_is_a_preorder(a in state(), b in state(), c in state()) {
        prop_assert!(at_least_as_hard(&a, &a).unwrap());
        if at_least_as_hard(&a, &b).unwrap() && at_least_as_hard(&b, &c).unwrap() {
            prop_assert!(at_least_as_hard(&a, &c).unwrap());
        }
    }

    #[test]
    fn dropping_obligations_never_makes_harder(a in state(), keep in prop::collection::vec(any::<bool>(), 4)) {
        let fewer: Vec<Obligation> = a
            .obligations()
            .iter()
            .zip(keep.iter().cycle())
            .filter(|(_, k)| **k)
            .map(|(o, _)| o.clone())
            .collect();
        prop_assert!(at_least_as_hard(&a, &ProofState::Obligations(fewer)).unwrap());
    }

    #[test]
    fn rendered_prompts_parse_and_fit(
        obs in prop::collection::vec(obligation(), 1..4),
        bad in prop::collection::vec("[a-z \\[\\]]{1,12}", 0..4),
        budget in 10usize..400,
    ) {
        let bad: Vec<Tactic> = bad.iter().filter_map(|t| Tactic::new(t).ok()).collect();
        let bundle = PromptBundle {
            stack: vec![ProofState::Obligations(obs)],
            bad,
            ..PromptBundle::default()
        };
        match promptify(&bundle, budget) {
            Ok(p) => {
                prop_assert!(p.tokens <= budget);
                prop_assert!(check_agent_prompt(&p.agent).is_ok(), "{}", p.agent);
            }
            Err(PromptError::BudgetTooSmall { .. }) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn search_is_sorted_positive_and_bounded(docs in prop::collection::vec(words(), 1..10), q in words(), k in 0usize..6) {
        let corpus = docs
            .iter()
            .enumerate()
            .map(|(i, s)| LemmaRecord { name: format!("d{i}"), statement: s.clone(), kind: LemmaKind::Lemma })
            .collect();
        let index = RetrievalIndex::build(corpus).unwrap();
        let all = index.score_all(&q);
        prop_assert!(all.iter().all(|s| *s >= 0.0 && s.is_finite()));
        let hits = index.search(&q, k).hits;
        prop_assert!(hits.len() <= k);
        prop_assert!(hits.iter().all(|h| h.score > 0.0));
        prop_assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        let positive = all.iter().filter(|s| **s > 0.0).count();
        prop_assert_eq!(hits.len(), k.min(positive));
    }
}
