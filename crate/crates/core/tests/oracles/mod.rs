//! Independent reference implementations, shared by the per-module tests
//! and the acceptance suite.

#![allow(dead_code)]

pub mod codec;
pub mod derivation;
pub mod harness;
pub mod matching;

use std::path::PathBuf;
use std::sync::Arc;

use congra_core::analyzer::{analyze, resolve_anaphora, tokenize, InstanceId, SemSpec, SlotId};
use congra_core::grammar::{load_grammar_dir, Grammar};
use congra_core::world::{load_world, SituationModel};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn shipped_grammar() -> Arc<Grammar> {
    Arc::new(load_grammar_dir(repo_root().join("grammar")).expect("shipped grammar loads"))
}

pub fn fixture_world(g: &Arc<Grammar>, name: &str) -> SituationModel {
    let path = repo_root().join("worlds").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_world(&text, g.clone()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Head analysis of `text` after anaphora resolution; panics unless it
/// spans every token.
pub fn resolved_head(g: &Grammar, text: &str) -> SemSpec {
    let tokens = tokenize(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    let cands = analyze(g, &tokens).unwrap_or_else(|e| panic!("{text}: {e}"));
    assert!(cands[0].is_full_span(tokens.len()), "{text}: head is partial");
    resolve_anaphora(g, &cands[0].semspec).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// Slot holding the single referent of the given category.
pub fn referent_slot(g: &Grammar, s: &SemSpec, category: &str) -> SlotId {
    let found: Vec<InstanceId> = s
        .instances_of(g, "RD")
        .filter(|&id| s.role_atom(id, "category") == Some(category))
        .collect();
    assert_eq!(found.len(), 1, "referents of category {category}");
    s.owner_slot(found[0]).expect("referent is held by a role")
}

/// The single instance of a schema.
pub fn only_instance(g: &Grammar, s: &SemSpec, schema: &str) -> InstanceId {
    let found: Vec<InstanceId> = s.instances_of(g, schema).collect();
    assert_eq!(found.len(), 1, "instances of {schema}");
    found[0]
}

/// Outcome of comparing an implementation with its oracle.
#[derive(Debug, Default)]
pub struct Report {
    pub cases: usize,
    pub mismatches: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn summary(&self) -> String {
        match self.mismatches.first() {
            None => format!("{} cases agree", self.cases),
            Some(first) => format!(
                "{} of {} cases disagree; first: {first}",
                self.mismatches.len(),
                self.cases
            ),
        }
    }
}
