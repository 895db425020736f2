use std::collections::BTreeSet;

use crate::grammar::Grammar;
use crate::specializer::{Claim, Determiner, RefId, ReferentDescriptor};
use crate::world::{Level, Place, SituationModel, WorldError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grounding {
    Unique(String),
    Ambiguous(BTreeSet<String>),
    Empty,
}

/// Ground a descriptor to one object. Indefinites take the candidate
/// nearest the robot; definites surface their ambiguity.
pub fn ground(arena: &[ReferentDescriptor], id: RefId, m: &SituationModel) -> Result<Grounding, WorldError> {
    let found: Vec<String> = m.objects_matching(arena, id)?.into_iter().collect();
    Ok(pick(arena, id, found, m))
}

/// Ground a descriptor to a region or object.
pub fn ground_place(arena: &[ReferentDescriptor], id: RefId, m: &SituationModel) -> Result<Grounding, WorldError> {
    let found: Vec<String> = m
        .places_matching(arena, id)?
        .into_iter()
        .map(|p| match p {
            Place::Region(n) | Place::Object(n) => n,
        })
        .collect();
    Ok(pick(arena, id, found, m))
}

fn pick(arena: &[ReferentDescriptor], id: RefId, mut found: Vec<String>, m: &SituationModel) -> Grounding {
    found.sort();
    found.dedup();
    match found.len() {
        0 => Grounding::Empty,
        1 => Grounding::Unique(found.pop().expect("one candidate")),
        _ if arena[id.0].determiner == Determiner::Indefinite => {
            let (rx, ry) = (m.robot.x, m.robot.y);
            let dist = |name: &String| {
                m.place(name)
                    .and_then(|p| m.place_point(&p))
                    .map_or(f64::INFINITY, |(x, y)| (x - rx).hypot(y - ry))
            };
            let best = found
                .iter()
                .min_by(|a, b| dist(a).total_cmp(&dist(b)).then_with(|| a.cmp(b)))
                .expect("non-empty")
                .clone();
            Grounding::Unique(best)
        }
        _ => Grounding::Ambiguous(found.into_iter().collect()),
    }
}

/// What the last clarification question asked about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Attribute {
    None,
    Color,
    Size,
    Location,
}

impl Attribute {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::None => "none",
            Attribute::Color => "color",
            Attribute::Size => "size",
            Attribute::Location => "location",
        }
    }

    fn value(self, name: &str, m: &SituationModel) -> Option<String> {
        let Some(o) = m.objects.get(name) else {
            return (self == Attribute::Location).then(|| name.to_string());
        };
        match self {
            Attribute::None => None,
            Attribute::Color => o.properties.get("color").cloned(),
            Attribute::Size => o.properties.get("size").cloned(),
            Attribute::Location => Some(match &o.level {
                Level::Floor => m
                    .regions
                    .values()
                    .filter(|r| r.contains(o.x, o.y))
                    .map(|r| format!("under:{}", r.name))
                    .next()
                    .unwrap_or_else(|| "floor".into()),
                other => other.to_string(),
            }),
        }
    }
}

const ATTRIBUTE_ORDER: [Attribute; 3] = [Attribute::Color, Attribute::Size, Attribute::Location];

/// Next question for an ambiguous candidate set: "Which one?" first, then
/// the next attribute (color, size, location) on which the candidates
/// differ.
pub fn make_clarification(candidates: &BTreeSet<String>, asked: Attribute, m: &SituationModel) -> (String, Attribute) {
    if asked == Attribute::None {
        return ("Which one?".into(), Attribute::Color);
    }
    for attr in ATTRIBUTE_ORDER.into_iter().filter(|a| *a > asked) {
        let values: BTreeSet<Option<String>> = candidates.iter().map(|c| attr.value(c, m)).collect();
        if values.len() > 1 {
            return (format!("Which {}?", attr.as_str()), attr);
        }
    }
    let ids: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let listed = match ids.split_last() {
        Some((last, init)) if !init.is_empty() => format!("{} or {last}", init.join(", ")),
        _ => ids.join(""),
    };
    (format!("Which one: {listed}?"), Attribute::Location)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("{key} cannot be both {had} and {got}")]
    PropertyConflict { key: String, had: String, got: String },
    #[error("a {got} is not a {had}")]
    TypeConflict { had: String, got: String },
}

/// Copy a descriptor and everything it refers to into another arena.
pub(crate) fn import(dst: &mut Vec<ReferentDescriptor>, src: &[ReferentDescriptor], id: RefId) -> RefId {
    let mut d = src[id.0].clone();
    d.relations = d
        .relations
        .iter()
        .map(|(rel, lm)| (rel.clone(), import(dst, src, *lm)))
        .collect();
    dst.push(d);
    RefId(dst.len() - 1)
}

fn same(a_arena: &[ReferentDescriptor], a: RefId, b_arena: &[ReferentDescriptor], b: RefId) -> bool {
    let (x, y) = (&a_arena[a.0], &b_arena[b.0]);
    x.onto_type == y.onto_type
        && x.determiner == y.determiner
        && x.properties == y.properties
        && x.referent_id == y.referent_id
        && x.relations.len() == y.relations.len()
        && x.relations
            .iter()
            .zip(&y.relations)
            .all(|((ra, la), (rb, lb))| ra == rb && same(a_arena, *la, b_arena, *lb))
}

fn add_property(d: &mut ReferentDescriptor, key: &str, value: &str) -> Result<(), RefineError> {
    match d.properties.get(key) {
        Some(had) if had != value => Err(RefineError::PropertyConflict {
            key: key.to_string(),
            had: had.clone(),
            got: value.to_string(),
        }),
        _ => {
            d.properties.insert(key.to_string(), value.to_string());
            Ok(())
        }
    }
}

fn add_relation(
    pending: &mut Vec<ReferentDescriptor>,
    target: RefId,
    rel: &str,
    src: &[ReferentDescriptor],
    lm: RefId,
) {
    let exists = pending[target.0]
        .relations
        .iter()
        .any(|(r, l)| r == rel && same(pending, *l, src, lm));
    if !exists {
        let lm = import(pending, src, lm);
        pending[target.0].relations.push((rel.to_string(), lm));
    }
}

/// Merge an answer's constraints into the pending descriptor. The answer
/// may narrow the type but not contradict it or any stated property.
pub fn refine_descriptor(
    g: &Grammar,
    pending: &mut Vec<ReferentDescriptor>,
    target: RefId,
    answer: &[ReferentDescriptor],
    answer_id: RefId,
    claim: Option<&Claim>,
) -> Result<(), RefineError> {
    let mut merged = pending.clone();
    let a = &answer[answer_id.0];
    let had = &merged[target.0].onto_type;
    if g.is_subtype(&a.onto_type, had) {
        merged[target.0].onto_type = a.onto_type.clone();
    } else if !g.is_subtype(had, &a.onto_type) {
        return Err(RefineError::TypeConflict {
            had: had.clone(),
            got: a.onto_type.clone(),
        });
    }
    for (k, v) in &a.properties {
        add_property(&mut merged[target.0], k, v)?;
    }
    for (rel, lm) in &a.relations {
        add_relation(&mut merged, target, rel, answer, *lm);
    }
    match claim {
        Some(Claim::Property { key, value }) => add_property(&mut merged[target.0], key, value)?,
        Some(Claim::Relation { relation, landmark }) => add_relation(&mut merged, target, relation, answer, *landmark),
        Some(Claim::Exists) | None => {}
    }
    *pending = merged;
    Ok(())
}
