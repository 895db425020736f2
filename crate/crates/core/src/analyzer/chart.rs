use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::rc::Rc;

use super::semspec::SemSpec;
use super::token::Token;
use super::unify::compose;
use super::AnalyzerError;
use crate::grammar::{Construction, ConstructionKind, FormRelation, Grammar};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCandidate {
    /// Root construction of the analysis.
    pub construction: String,
    pub semspec: SemSpec,
    /// Token indices the analysis spans.
    pub covered: BTreeSet<usize>,
    pub instance_count: usize,
    pub unfilled_count: usize,
}

impl AnalysisCandidate {
    fn new(construction: String, semspec: SemSpec, span: Range<usize>) -> Self {
        Self {
            construction,
            instance_count: semspec.instances.len(),
            unfilled_count: semspec.unfilled_count(),
            semspec,
            covered: span.collect(),
        }
    }

    /// True when the analysis covers every one of `n` tokens.
    pub fn is_full_span(&self, n: usize) -> bool {
        self.covered.len() == n
    }
}

/// Ranking key; smaller is better.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Score {
    pub covered: Reverse<usize>,
    pub instance_count: usize,
    pub unfilled_count: usize,
    pub canonical: String,
}

pub fn score_candidate(c: &AnalysisCandidate) -> Score {
    Score {
        covered: Reverse(c.covered.len()),
        instance_count: c.instance_count,
        unfilled_count: c.unfilled_count,
        canonical: c.semspec.canonical_text(),
    }
}

/// A chart edge reported when nothing spans enough to count as an analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialEdge {
    pub construction: String,
    pub span: Range<usize>,
}

struct Edge {
    cxn: String,
    start: usize,
    end: usize,
    sem: Rc<SemSpec>,
}

/// Repeated passes over one span pick up unary chains; this bounds them.
const MAX_SPAN_ROUNDS: usize = 8;

struct Chart<'g> {
    g: &'g Grammar,
    edges: Vec<Edge>,
    by_start: Vec<Vec<usize>>,
    packed: BTreeSet<(String, usize, usize, String)>,
}

impl<'g> Chart<'g> {
    fn add(&mut self, cxn: &str, span: Range<usize>, sem: SemSpec) -> bool {
        let key = (cxn.to_string(), span.start, span.end, sem.canonical_text());
        if !self.packed.insert(key) {
            return false;
        }
        self.by_start[span.start].push(self.edges.len());
        self.edges.push(Edge {
            cxn: cxn.to_string(),
            start: span.start,
            end: span.end,
            sem: Rc::new(sem),
        });
        true
    }

    /// Every way to cover exactly `start..end` with the constituents of
    /// `cxn`, in order; `None` marks a skipped optional constituent.
    fn fillings(&self, cxn: &Construction, start: usize, end: usize) -> Vec<Vec<Option<usize>>> {
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        self.fill(cxn, 0, start, end, &mut chosen, &mut out);
        out
    }

    fn fill(
        &self,
        cxn: &Construction,
        k: usize,
        pos: usize,
        end: usize,
        chosen: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        let cons = cxn.constituents();
        if k == cons.len() {
            if pos == end && chosen.iter().any(Option::is_some) {
                out.push(chosen.clone());
            }
            return;
        }
        let c = &cons[k];
        if c.optional {
            chosen.push(None);
            self.fill(cxn, k + 1, pos, end, chosen, out);
            chosen.pop();
        }
        if pos >= self.by_start.len() {
            return;
        }
        for &e in &self.by_start[pos] {
            let edge = &self.edges[e];
            if edge.end <= end && self.g.is_subtype(&edge.cxn, &c.ty) {
                chosen.push(Some(e));
                self.fill(cxn, k + 1, edge.end, end, chosen, out);
                chosen.pop();
            }
        }
    }

    fn form_ok(&self, cxn: &Construction, filling: &[Option<usize>]) -> bool {
        let ConstructionKind::Phrasal { constituents, form } = &cxn.kind else {
            return true;
        };
        let edge_of = |label: &str| {
            let i = constituents.iter().position(|c| c.label == label)?;
            filling[i].map(|e| &self.edges[e])
        };
        form.iter().all(|f| match (edge_of(&f.left), edge_of(&f.right)) {
            (Some(a), Some(b)) => match f.relation {
                FormRelation::Meets => a.end == b.start,
                FormRelation::Before => a.end <= b.start,
            },
            _ => true,
        })
    }
}

/// Chart-parse `tokens` and return every rooted analysis, best first.
pub fn analyze(g: &Grammar, tokens: &[Token]) -> Result<Vec<AnalysisCandidate>, AnalyzerError> {
    if tokens.is_empty() {
        return Err(AnalyzerError::EmptyInput);
    }
    let n = tokens.len();
    let mut lexicon: BTreeMap<&str, Vec<&Construction>> = BTreeMap::new();
    let mut phrasal = Vec::new();
    for c in g.constructions.values() {
        match &c.kind {
            ConstructionKind::Lexical { token } => lexicon.entry(token.as_str()).or_default().push(c),
            ConstructionKind::Phrasal { .. } => phrasal.push(c),
            ConstructionKind::Abstract => {}
        }
    }
    let mut chart = Chart {
        g,
        edges: Vec::new(),
        by_start: vec![Vec::new(); n],
        packed: BTreeSet::new(),
    };
    for t in tokens {
        let Some(entries) = lexicon.get(t.surface.as_str()) else {
            return Err(AnalyzerError::UnknownToken {
                token: t.surface.clone(),
                index: t.index,
            });
        };
        for c in entries {
            match compose(g, c, t.index..t.index + 1, &[]) {
                Ok(sem) => {
                    chart.add(&c.name, t.index..t.index + 1, sem);
                }
                Err(e) => tracing::debug!(cxn = %c.name, "lexical meaning failed: {}", e.0),
            }
        }
    }
    for len in 1..=n {
        for start in 0..=n - len {
            let end = start + len;
            for _ in 0..MAX_SPAN_ROUNDS {
                let mut added = false;
                for cxn in &phrasal {
                    for filling in chart.fillings(cxn, start, end) {
                        if !chart.form_ok(cxn, &filling) {
                            continue;
                        }
                        let children: Vec<(&str, Rc<SemSpec>)> = cxn
                            .constituents()
                            .iter()
                            .zip(&filling)
                            .filter_map(|(c, e)| e.map(|e| (c.label.as_str(), chart.edges[e].sem.clone())))
                            .collect();
                        let refs: Vec<(&str, &SemSpec)> =
                            children.iter().map(|(l, s)| (*l, s.as_ref())).collect();
                        match compose(g, cxn, start..end, &refs) {
                            Ok(sem) => added |= chart.add(&cxn.name, start..end, sem),
                            Err(e) => tracing::trace!(cxn = %cxn.name, start, end, "unification failed: {}", e.0),
                        }
                    }
                }
                if !added {
                    break;
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    for e in &chart.edges {
        if !g.is_root(&e.cxn) {
            continue;
        }
        if seen.insert((e.start, e.end, e.sem.canonical_text())) {
            candidates.push(AnalysisCandidate::new(e.cxn.clone(), (*e.sem).clone(), e.start..e.end));
        }
    }
    if candidates.is_empty() {
        let longest = chart.edges.iter().map(|e| e.end - e.start).max().unwrap_or(0);
        let mut partial: Vec<PartialEdge> = chart
            .edges
            .iter()
            .filter(|e| e.end - e.start == longest)
            .map(|e| PartialEdge {
                construction: e.cxn.clone(),
                span: e.start..e.end,
            })
            .collect();
        partial.dedup();
        return Err(AnalyzerError::NoParse { partial });
    }
    candidates.sort_by_cached_key(score_candidate);
    Ok(candidates)
}
