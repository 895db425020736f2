mod oracles;

use congra_core::analyzer::{analyze, resolve_anaphora, score_candidate, tokenize, AnalyzerError, SemSpec, SlotValue};
use congra_core::grammar::Grammar;
use oracles::{only_instance, referent_slot, repo_root, resolved_head, shipped_grammar};

fn corpus() -> Vec<String> {
    std::fs::read_to_string(repo_root().join("crates/core/tests/fixtures/corpus.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn head(g: &Grammar, text: &str) -> SemSpec {
    analyze(g, &tokenize(text).unwrap()).unwrap().remove(0).semspec
}

#[test]
fn tokenizer_lowercases_and_splits_commas() {
    let words: Vec<String> = tokenize("PR2, bring the soda can to the dining table!")
        .unwrap()
        .into_iter()
        .map(|t| t.surface)
        .collect();
    assert_eq!(
        words,
        ["pr2", ",", "bring", "the", "soda", "can", "to", "the", "dining", "table"]
    );
    assert_eq!(tokenize("Which one?").unwrap().len(), 2);
    assert_eq!(tokenize("   "), Err(AnalyzerError::EmptyInput));
}

#[test]
fn bring_sentence_shares_one_slot_across_motion_roles() {
    let g = shipped_grammar();
    let s = resolved_head(&g, "bring the soda can to the dining table");
    only_instance(&g, &s, "EstablishHold");
    let cause = only_instance(&g, &s, "CauseEffect");
    let motion = s.role_instance(cause, "affectedProcess").expect("affectedProcess holds an instance");
    assert_eq!(s.instance(motion).schema, "MotionPath");
    let spg = s.role_instance(motion, "spg").expect("MotionPath evokes SPG");
    assert_eq!(s.instance(spg).schema, "SPG");
    let can = referent_slot(&g, &s, "soda_can");
    assert_eq!(s.role_slot(motion, "mover"), Some(can));
    assert_eq!(s.role_slot(spg, "trajector"), Some(can));
    assert_eq!(s.role_slot(cause, "affectedEntity"), Some(can));
    assert_eq!(s.role_slot(spg, "goal"), Some(referent_slot(&g, &s, "dining_table")));
}

fn pronoun_target(g: &Grammar, text: &str, category: &str) {
    let s = resolved_head(g, text);
    let cause = only_instance(g, &s, "CauseEffect");
    assert_eq!(
        s.role_slot(cause, "affectedEntity"),
        Some(referent_slot(g, &s, category)),
        "{text}"
    );
}

#[test]
fn pronoun_prefers_head_noun_over_modifier() {
    let g = shipped_grammar();
    pronoun_target(&g, "if there is a cup on the dining table, please bring it to me", "cup");
    pronoun_target(&g, "if there is a table under the cup, please bring it to me", "table");
}

#[test]
fn ammonia_goes_into_the_test_tube() {
    let g = shipped_grammar();
    let s = resolved_head(
        &g,
        "if there is an empty test tube to the left of the bottle with sulfuric acid, please pour 10 ml ammonia in it",
    );
    let spg = only_instance(&g, &s, "SPG");
    assert_eq!(s.role_slot(spg, "goal"), Some(referent_slot(&g, &s, "test_tube")));
    assert_eq!(s.role_slot(spg, "trajector"), Some(referent_slot(&g, &s, "ammonia")));
}

#[test]
fn one_anaphor_copies_the_category_without_identity() {
    let g = shipped_grammar();
    let s = resolved_head(&g, "if the marker is on the table, pick up a big one");
    let marker_like: Vec<_> = s
        .instances_of(&g, "RD")
        .filter(|&id| s.role_atom(id, "category") == Some("marker"))
        .collect();
    assert_eq!(marker_like.len(), 2);
    assert_ne!(s.owner_slot(marker_like[0]), s.owner_slot(marker_like[1]));
}

#[test]
fn move_transitive_and_intransitive_differ() {
    let g = shipped_grammar();
    let t = resolved_head(&g, "move the table");
    let cause = only_instance(&g, &t, "CauseEffect");
    assert_eq!(t.role_instance(cause, "affectedEntity").map(|i| t.role_atom(i, "category")), Some(Some("table")));
    let i = resolved_head(&g, "move to the table");
    assert_eq!(i.root_instance().schema, "MotionPath");
    assert_eq!(i.instances_of(&g, "CauseEffect").count(), 0);
    let spg = only_instance(&g, &i, "SPG");
    assert_eq!(i.role_slot(spg, "goal"), Some(referent_slot(&g, &i, "table")));
}

#[test]
fn unknown_word_is_reported_with_position() {
    let g = shipped_grammar();
    assert_eq!(
        analyze(&g, &tokenize("xyzzy").unwrap()).unwrap_err(),
        AnalyzerError::UnknownToken {
            token: "xyzzy".into(),
            index: 0
        }
    );
}

#[test]
fn pronoun_without_antecedent_is_an_error() {
    let g = shipped_grammar();
    let s = head(&g, "bring it to me");
    assert!(matches!(
        resolve_anaphora(&g, &s),
        Err(AnalyzerError::UnresolvedPronoun { .. })
    ));
}

#[test]
fn word_salad_has_no_parse_but_reports_partial_edges() {
    let g = shipped_grammar();
    match analyze(&g, &tokenize("the the marker bring").unwrap()) {
        Ok(c) => assert!(!c[0].is_full_span(4)),
        Err(AnalyzerError::NoParse { partial }) => assert!(!partial.is_empty()),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn every_corpus_sentence_parses_fully_and_validates() {
    let g = shipped_grammar();
    let sentences = corpus();
    assert_eq!(sentences.len(), 50);
    let mut failures = Vec::new();
    for text in &sentences {
        let tokens = tokenize(text).unwrap();
        match analyze(&g, &tokens) {
            Ok(cands) if cands[0].is_full_span(tokens.len()) => {
                for c in &cands {
                    if let Err(e) = c.semspec.validate(&g) {
                        failures.push(format!("{text}: {e:?}"));
                    }
                }
                let scores: Vec<_> = cands.iter().map(score_candidate).collect();
                if !scores.windows(2).all(|w| w[0] <= w[1]) {
                    failures.push(format!("{text}: candidates out of order"));
                }
            }
            Ok(_) => failures.push(format!("{text}: head is partial")),
            Err(e) => failures.push(format!("{text}: {e}")),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn analysis_is_deterministic() {
    let g = shipped_grammar();
    let again = shipped_grammar();
    for text in corpus() {
        let a = head(&g, &text).canonical_text();
        assert_eq!(a, head(&g, &text).canonical_text(), "{text}");
        assert_eq!(a, head(&again, &text).canonical_text(), "{text}");
    }
}

/// Resolution rewires only roles that held a pronoun, and only the
/// category of a one-anaphor.
#[test]
fn resolution_touches_only_anaphor_slots() {
    let g = shipped_grammar();
    for text in corpus() {
        let before = head(&g, &text);
        let Ok(after) = resolve_anaphora(&g, &before) else {
            continue;
        };
        let is_anaphor = |id| before.role_atom(id, "anaphor").is_some();
        for (id, inst) in &after.instances {
            let old = &before.instances[id];
            for (role, slot) in &inst.roles {
                let was = old.roles[role];
                if *slot == was {
                    continue;
                }
                let ok = match before.slot(was) {
                    SlotValue::Instance(i) => before.role_atom(*i, "anaphor") == Some("pronoun"),
                    _ => is_anaphor(*id) && role == "category",
                };
                assert!(ok, "{text}: {} changed {role}", inst.schema);
            }
        }
        if !before.instances.keys().any(|&id| is_anaphor(id)) {
            assert_eq!(after, before, "{text}");
        }
    }
}
