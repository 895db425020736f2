//! Within-sentence anaphora.
//!
//! Referents are `RD` instances. A pronoun (`anaphor = pronoun`) takes over
//! the slot of its antecedent, so both roles end up co-indexed. A
//! one-anaphor (`anaphor = one`) only copies the antecedent's category into
//! a fresh slot. Antecedents must precede the anaphor and have a category
//! at least as specific as the anaphor's own, which carries any selectional
//! restriction the consuming construction imposed. Head nouns beat nouns
//! buried in modifiers; among equals the closest one wins.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::semspec::{InstanceId, SemSpec, SlotId, SlotValue};
use super::AnalyzerError;
use crate::grammar::Grammar;

const REFERENT: &str = "RD";
/// Roles that lead into a subordinate description.
const MODIFIER_ROLES: &[&str] = &["landmark", "goal", "source", "path", "modifier"];

fn anaphor_kind(s: &SemSpec, id: InstanceId) -> Option<&str> {
    s.role_atom(id, "anaphor")
}

/// Number of modifier edges on the cheapest path from the root.
fn modifier_depths(s: &SemSpec) -> BTreeMap<InstanceId, usize> {
    let mut depth = BTreeMap::new();
    let mut queue = VecDeque::from([(s.root, 0usize)]);
    while let Some((id, d)) = queue.pop_front() {
        if depth.get(&id).is_some_and(|&old| old <= d) {
            continue;
        }
        depth.insert(id, d);
        for (role, slot) in &s.instances[&id].roles {
            if let Some(SlotValue::Instance(next)) = s.slots.get(slot) {
                let step = usize::from(MODIFIER_ROLES.contains(&role.as_str()));
                if step == 0 {
                    queue.push_front((*next, d));
                } else {
                    queue.push_back((*next, d + 1));
                }
            }
        }
    }
    depth
}

fn antecedent(g: &Grammar, s: &SemSpec, anaphor: InstanceId) -> Option<InstanceId> {
    let span = s.provenance.get(&anaphor)?.clone();
    let wanted = s
        .role_atom(anaphor, "category")
        .or(g.ontology_top())
        .unwrap_or("entity")
        .to_string();
    let depths = modifier_depths(s);
    s.instances_of(g, REFERENT)
        .filter(|&id| id != anaphor)
        .filter(|&id| anaphor_kind(s, id).is_none())
        .filter(|&id| s.role_atom(id, "givenness") != Some("speaker"))
        .filter(|&id| s.provenance.get(&id).is_some_and(|p| p.end <= span.start))
        .filter(|&id| {
            s.role_atom(id, "category")
                .is_some_and(|c| g.is_subtype(c, &wanted))
        })
        .min_by_key(|id| {
            let d = depths.get(id).copied().unwrap_or(usize::MAX);
            (d, std::cmp::Reverse(s.provenance[id].end), std::cmp::Reverse(s.provenance[id].start))
        })
}

fn relink(s: &mut SemSpec, from: SlotId, to: SlotId) {
    for inst in s.instances.values_mut() {
        for slot in inst.roles.values_mut() {
            if *slot == from {
                *slot = to;
            }
        }
    }
}

/// Resolve every pronoun and one-anaphor in `s`.
pub fn resolve_anaphora(g: &Grammar, s: &SemSpec) -> Result<SemSpec, AnalyzerError> {
    let mut s = s.clone();
    let mut done: BTreeSet<InstanceId> = BTreeSet::new();
    loop {
        let next = s
            .instances_of(g, REFERENT)
            .filter(|id| !done.contains(id))
            .filter(|&id| matches!(anaphor_kind(&s, id), Some("pronoun" | "one")))
            .min_by_key(|id| s.provenance.get(id).map(|p| p.start));
        let Some(anaphor) = next else { break };
        done.insert(anaphor);
        let index = s.provenance.get(&anaphor).map_or(0, |p| p.start);
        let found = antecedent(g, &s, anaphor);
        if anaphor_kind(&s, anaphor) == Some("pronoun") {
            let resolved = found.and_then(|a| Some((s.owner_slot(anaphor)?, s.owner_slot(a)?)));
            let Some((from, to)) = resolved else {
                return Err(AnalyzerError::UnresolvedPronoun {
                    pronoun: "it".into(),
                    index,
                });
            };
            relink(&mut s, from, to);
            s.collect_garbage();
        } else if let Some(a) = found {
            let category = s.role_atom(a, "category").map(str::to_string);
            if let Some(category) = category {
                let fresh = SlotId(s.slots.keys().next_back().map_or(0, |k| k.0 + 1));
                s.slots.insert(fresh, SlotValue::Atom(category));
                s.instances
                    .get_mut(&anaphor)
                    .expect("live anaphor")
                    .roles
                    .insert("category".into(), fresh);
                s.collect_garbage();
            }
        }
    }
    Ok(s)
}
