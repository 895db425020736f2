//! Exhaustive top-down derivation enumeration, compared with the chart
//! parser's ranked candidates.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use congra_core::analyzer::{analyze, compose, tokenize, AnalyzerError, SemSpec};
use congra_core::grammar::{load_grammar, Construction, ConstructionKind, FormRelation, Grammar, GrammarSource};

use super::{repo_root, Report};

pub const TOY_VOCABULARY: [&str; 5] = ["the", "robot", "table", "on", "see"];
pub const MAX_LENGTH: usize = 6;

/// A constituent choice: its span and meaning, or nothing for a skipped optional.
type Pick = Option<(usize, usize, SemSpec)>;

pub fn toy_grammar() -> Grammar {
    let path = repo_root().join("crates/core/tests/fixtures/toy.cg");
    let text = std::fs::read_to_string(&path).expect("toy grammar fixture");
    load_grammar(&[GrammarSource::new("toy.cg", text)]).expect("toy grammar loads")
}

/// Every derivation of a construction of type `ty` over exactly
/// `start..end`, as (construction, semspec), deduplicated by rendering.
struct Enumerator<'g> {
    g: &'g Grammar,
    words: Vec<String>,
    memo: BTreeMap<(String, usize, usize), Vec<(String, SemSpec)>>,
    /// Keys being derived; a constituent re-entering one spans the whole
    /// range, leaving nothing for its required siblings.
    active: BTreeSet<(String, usize, usize)>,
}

impl Enumerator<'_> {
    fn derive(&mut self, ty: &str, start: usize, end: usize) -> Vec<(String, SemSpec)> {
        let key = (ty.to_string(), start, end);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        if !self.active.insert(key.clone()) {
            return Vec::new();
        }
        let mut out: Vec<(String, SemSpec)> = Vec::new();
        let mut seen = BTreeSet::new();
        let cxns: Vec<Construction> = self
            .g
            .constructions
            .values()
            .filter(|c| self.g.is_subtype(&c.name, ty))
            .cloned()
            .collect();
        for c in cxns {
            let mut found = Vec::new();
            match &c.kind {
                ConstructionKind::Abstract => {}
                ConstructionKind::Lexical { token } => {
                    if end == start + 1 && self.words[start] == *token {
                        if let Ok(s) = compose(self.g, &c, start..end, &[]) {
                            found.push(s);
                        }
                    }
                }
                ConstructionKind::Phrasal { constituents, form } => {
                    let g = self.g;
                    let mut partial = Vec::new();
                    self.sequences(&c, 0, start, end, &mut partial, &mut |children| {
                        let ok = form.iter().all(|f| {
                            let span = |label: &str| {
                                let i = constituents.iter().position(|k| k.label == label)?;
                                children[i].as_ref().map(|(s, e, _): &(usize, usize, SemSpec)| (*s, *e))
                            };
                            match (span(&f.left), span(&f.right)) {
                                (Some(a), Some(b)) => match f.relation {
                                    FormRelation::Meets => a.1 == b.0,
                                    FormRelation::Before => a.1 <= b.0,
                                },
                                _ => true,
                            }
                        });
                        if !ok {
                            return None;
                        }
                        let refs: Vec<(&str, &SemSpec)> = constituents
                            .iter()
                            .zip(children)
                            .filter_map(|(k, ch)| ch.as_ref().map(|(_, _, s)| (k.label.as_str(), s)))
                            .collect();
                        compose(g, &c, start..end, &refs).ok()
                    }, &mut found);
                }
            }
            for s in found {
                if seen.insert((c.name.clone(), s.canonical_text())) {
                    out.push((c.name.clone(), s));
                }
            }
        }
        self.active.remove(&key);
        self.memo.insert(key, out.clone());
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn sequences(
        &mut self,
        c: &Construction,
        k: usize,
        pos: usize,
        end: usize,
        chosen: &mut Vec<Pick>,
        finish: &mut dyn FnMut(&[Pick]) -> Option<SemSpec>,
        found: &mut Vec<SemSpec>,
    ) {
        let cons = c.constituents();
        if k == cons.len() {
            if pos == end && chosen.iter().any(Option::is_some) {
                if let Some(s) = finish(chosen) {
                    found.push(s);
                }
            }
            return;
        }
        let con = cons[k].clone();
        if con.optional {
            chosen.push(None);
            self.sequences(c, k + 1, pos, end, chosen, finish, found);
            chosen.pop();
        }
        for stop in pos + 1..=end {
            for (_, s) in self.derive(&con.ty, pos, stop) {
                chosen.push(Some((pos, stop, s)));
                self.sequences(c, k + 1, stop, end, chosen, finish, found);
                chosen.pop();
            }
        }
    }
}

type Key = (Reverse<usize>, usize, usize, String);

/// All rooted analyses of `words` as (start, end, rendering), best first.
pub fn enumerate(g: &Grammar, words: &[&str]) -> Vec<(usize, usize, String)> {
    let mut e = Enumerator {
        g,
        words: words.iter().map(|w| w.to_string()).collect(),
        memo: BTreeMap::new(),
        active: BTreeSet::new(),
    };
    let n = words.len();
    let mut best: BTreeMap<(usize, usize, String), Key> = BTreeMap::new();
    for root in g.roots.clone() {
        for start in 0..n {
            for end in start + 1..=n {
                for (cxn, s) in e.derive(&root, start, end) {
                    if !g.is_root(&cxn) {
                        continue;
                    }
                    let text = s.canonical_text();
                    let key = (Reverse(end - start), s.instances.len(), s.unfilled_count(), text.clone());
                    best.insert((start, end, text), key);
                }
            }
        }
    }
    let mut all: Vec<_> = best.into_iter().collect();
    all.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.into_iter().map(|(k, _)| k).collect()
}

fn sentences(vocab: &[&'static str], max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<&str>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &layer {
            for w in vocab {
                let mut t = s.clone();
                t.push(*w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Compare the parser with the enumerator on every toy sentence.
pub fn check_toy_grammar(max_len: usize) -> Report {
    let g = toy_grammar();
    let mut report = Report::default();
    for words in sentences(&TOY_VOCABULARY, max_len) {
        report.cases += 1;
        let text = words.join(" ");
        let expected = enumerate(&g, &words);
        let tokens = tokenize(&text).expect("toy words tokenize");
        match analyze(&g, &tokens) {
            Ok(cands) => {
                let got: Vec<(usize, usize, String)> = cands
                    .iter()
                    .map(|c| {
                        let start = *c.covered.first().expect("non-empty");
                        let end = *c.covered.last().expect("non-empty") + 1;
                        (start, end, c.semspec.canonical_text())
                    })
                    .collect();
                let got_set: BTreeSet<_> = got.iter().cloned().collect();
                let want_set: BTreeSet<_> = expected.iter().cloned().collect();
                if got.first() != expected.first() {
                    report.mismatches.push(format!("{text:?}: head candidate differs"));
                } else if got_set != want_set {
                    report.mismatches.push(format!(
                        "{text:?}: {} candidates, enumeration found {}",
                        got_set.len(),
                        want_set.len()
                    ));
                }
            }
            Err(AnalyzerError::NoParse { .. }) => {
                if !expected.is_empty() {
                    report.mismatches.push(format!("{text:?}: no parse, enumeration found {}", expected.len()));
                }
            }
            Err(e) => report.mismatches.push(format!("{text:?}: {e}")),
        }
    }
    report
}
