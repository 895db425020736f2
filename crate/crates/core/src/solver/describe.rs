use crate::specializer::{Determiner, RefId, ReferentDescriptor};

/// Adjective order for rendered descriptors.
const PROPERTY_ORDER: [&str; 3] = ["size", "state", "color"];

pub(crate) fn words(name: &str) -> String {
    name.replace('_', " ")
}

/// "blue marker under the table", without an article.
pub fn describe_bare(arena: &[ReferentDescriptor], id: RefId) -> String {
    let d = &arena[id.0];
    let mut parts: Vec<String> = Vec::new();
    for key in PROPERTY_ORDER {
        if let Some(v) = d.properties.get(key) {
            parts.push(words(v));
        }
    }
    for (k, v) in &d.properties {
        if !PROPERTY_ORDER.contains(&k.as_str()) {
            parts.push(words(v));
        }
    }
    parts.push(words(&d.onto_type));
    for (rel, lm) in &d.relations {
        parts.push(words(rel));
        parts.push(describe(arena, *lm));
    }
    parts.join(" ")
}

/// "the blue marker under the table", "a soda can", "me".
pub fn describe(arena: &[ReferentDescriptor], id: RefId) -> String {
    let d = &arena[id.0];
    if let Some(r) = &d.referent_id {
        return r.clone();
    }
    let bare = describe_bare(arena, id);
    match d.determiner {
        Determiner::Speaker => "me".into(),
        Determiner::Definite => format!("the {bare}"),
        Determiner::Wh => format!("which {bare}"),
        Determiner::Indefinite if d.properties.contains_key("amount") => bare,
        Determiner::Indefinite => {
            let article = if bare.starts_with(['a', 'e', 'i', 'o', 'u']) { "an" } else { "a" };
            format!("{article} {bare}")
        }
    }
}

/// "a", "a and b", "a, b and c".
pub(crate) fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}
