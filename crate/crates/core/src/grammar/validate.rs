use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{
    is_numeric_atom, BindingTarget, ConstructionKind, Grammar, Location, MeaningPath, PathHead,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub location: Option<Location>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.location {
            Some(l) => write!(f, "{l}: {sev}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

struct Collector(Vec<Diagnostic>);

impl Collector {
    fn error(&mut self, location: &Location, message: String) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            location: Some(location.clone()),
            message,
        });
    }
}

/// Check every structural invariant of a loaded grammar. An empty result
/// means the grammar is valid.
pub fn validate_grammar(g: &Grammar) -> Vec<Diagnostic> {
    let mut out = Collector(Vec::new());
    if g.roots.is_empty() {
        out.0.push(Diagnostic {
            severity: Severity::Error,
            location: None,
            message: "no root construction".into(),
        });
    }
    for (name, loc) in &g.root_locations {
        if !g.constructions.contains_key(name) {
            out.error(loc, format!("unknown root construction {name}"));
        }
    }
    check_cycles(g, &mut out);
    check_ontology(g, &mut out);
    check_schemas(g, &mut out);
    check_constructions(g, &mut out);
    out.0
}

fn check_cycles(g: &Grammar, out: &mut Collector) {
    let mut reported: BTreeSet<BTreeSet<String>> = BTreeSet::new();
    let names: Vec<(&String, &Location)> = g
        .schemas
        .iter()
        .map(|(n, s)| (n, &s.location))
        .chain(g.constructions.iter().map(|(n, c)| (n, &c.location)))
        .chain(g.ontology.iter().map(|(n, t)| (n, &t.location)))
        .collect();
    for (name, loc) in names {
        if let Some(cycle) = find_cycle(g, name) {
            let key: BTreeSet<String> = cycle.iter().cloned().collect();
            if reported.insert(key.clone()) {
                let listed: Vec<_> = key.into_iter().collect();
                out.error(loc, format!("inheritance cycle: {}", listed.join(", ")));
            }
        }
    }
}

/// Returns the members of a parent-link cycle through `start`, if any.
fn find_cycle(g: &Grammar, start: &str) -> Option<Vec<String>> {
    fn dfs(g: &Grammar, node: &str, start: &str, path: &mut Vec<String>, seen: &mut BTreeSet<String>) -> bool {
        for p in g.parents_of(node) {
            if p == start {
                return true;
            }
            if seen.insert(p.clone()) {
                path.push(p.clone());
                if dfs(g, &p, start, path, seen) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![start.to_string()];
    let mut seen = BTreeSet::new();
    dfs(g, start, start, &mut path, &mut seen).then_some(path)
}

fn check_ontology(g: &Grammar, out: &mut Collector) {
    let tops: Vec<_> = g.ontology.values().filter(|t| t.parent.is_none()).collect();
    if !g.ontology.is_empty() && tops.len() != 1 {
        let names: Vec<_> = tops.iter().map(|t| t.name.as_str()).collect();
        let loc = tops
            .first()
            .map(|t| t.location.clone())
            .unwrap_or_else(|| g.ontology.values().next().unwrap().location.clone());
        out.error(
            &loc,
            format!("ontology must have exactly one top type, found: {}", names.join(", ")),
        );
    }
    for t in g.ontology.values() {
        if let Some(p) = &t.parent {
            if !g.ontology.contains_key(p) {
                out.error(&t.location, format!("unknown parent type {p} of {}", t.name));
            }
        }
    }
}

fn check_schemas(g: &Grammar, out: &mut Collector) {
    for s in g.schemas.values() {
        for p in &s.parents {
            if !g.schemas.contains_key(p) {
                out.error(&s.location, format!("unknown parent schema {p} of {}", s.name));
            }
        }
        let mut own = BTreeSet::new();
        for r in &s.roles {
            if !own.insert(&r.name) {
                out.error(&s.location, format!("duplicate role {} in {}", r.name, s.name));
            }
            if !g.schemas.contains_key(&r.ty) && !g.ontology.contains_key(&r.ty) {
                out.error(
                    &s.location,
                    format!("unknown type {} for role {} in {}", r.ty, r.name, s.name),
                );
            }
        }
        // Roles inherited from different declaring schemas must not clash.
        let mut origin: BTreeMap<&str, &str> = BTreeMap::new();
        for anc in g.ancestors.get(&s.name).into_iter().flatten() {
            let Some(a) = g.schemas.get(anc) else { continue };
            for r in &a.roles {
                if let Some(prev) = origin.insert(&r.name, &a.name) {
                    if prev != a.name {
                        out.error(
                            &s.location,
                            format!(
                                "role {} of {} is declared in both {} and {}",
                                r.name, s.name, prev, a.name
                            ),
                        );
                    }
                }
            }
        }
        for (a, b) in &s.constraints {
            for path in [a, b] {
                if let Err(msg) = resolve_schema_path(g, &s.name, path) {
                    out.error(&s.location, msg);
                }
            }
        }
    }
}

/// Follow a role path through declared role types. Returns the final type.
fn resolve_schema_path(g: &Grammar, schema: &str, path: &[String]) -> Result<String, String> {
    let mut current = schema.to_string();
    let mut ty = current.clone();
    for (i, role) in path.iter().enumerate() {
        if !g.schemas.contains_key(&current) {
            return Err(format!("{current} is not a schema; cannot follow .{role}"));
        }
        ty = match g.role_type(&current, role) {
            Some(t) => t.to_string(),
            None => return Err(format!("unknown role {role} in {current}")),
        };
        if i + 1 < path.len() {
            current = ty.clone();
        }
    }
    Ok(ty)
}

/// Like [`resolve_schema_path`] but a role may be declared on any subcase of
/// the current schema, since unification can specialize instances.
fn resolve_meaning_roles(g: &Grammar, schema: &str, roles: &[String]) -> Result<(), String> {
    let mut current = schema.to_string();
    for role in roles {
        if !g.schemas.contains_key(&current) {
            return Err(format!("{current} is not a schema; cannot follow .{role}"));
        }
        let declaring = g
            .schemas
            .keys()
            .filter(|s| g.is_subtype(s, &current))
            .find_map(|s| g.role_type(s, role));
        match declaring {
            Some(t) => current = t.to_string(),
            None => return Err(format!("unknown role {role} in {current}")),
        }
    }
    Ok(())
}

fn check_constructions(g: &Grammar, out: &mut Collector) {
    for c in g.constructions.values() {
        for p in &c.parents {
            if !g.constructions.contains_key(p) {
                out.error(&c.location, format!("unknown parent construction {p} of {}", c.name));
            }
        }
        if !g.schemas.contains_key(&c.meaning) {
            out.error(&c.location, format!("unknown meaning schema {} in {}", c.meaning, c.name));
        }
        match &c.kind {
            ConstructionKind::Lexical { token } => {
                if token.trim().is_empty() {
                    out.error(&c.location, format!("lexical construction {} has an empty token", c.name));
                }
            }
            ConstructionKind::Phrasal { constituents, form } => {
                if constituents.is_empty() {
                    out.error(&c.location, format!("phrasal construction {} has no constituents", c.name));
                }
                if constituents.iter().all(|k| k.optional) {
                    out.error(&c.location, format!("construction {} has only optional constituents", c.name));
                }
                let mut labels = BTreeSet::new();
                for k in constituents {
                    if !labels.insert(k.label.as_str()) || k.label == "self" {
                        out.error(&c.location, format!("duplicate constituent label {} in {}", k.label, c.name));
                    }
                    if !g.constructions.contains_key(&k.ty) {
                        out.error(
                            &c.location,
                            format!("unknown constructional type {} for constituent {} in {}", k.ty, k.label, c.name),
                        );
                    }
                }
                for f in form {
                    for l in [&f.left, &f.right] {
                        if !labels.contains(l.as_str()) {
                            out.error(&c.location, format!("form constraint names unknown constituent {l} in {}", c.name));
                        }
                    }
                    let pos = |l: &str| constituents.iter().position(|k| k.label == l);
                    if let (Some(a), Some(b)) = (pos(&f.left), pos(&f.right)) {
                        if a >= b {
                            out.0.push(Diagnostic {
                                severity: Severity::Warning,
                                location: Some(c.location.clone()),
                                message: format!(
                                    "form constraint {} before {} contradicts constituent order in {}",
                                    f.left, f.right, c.name
                                ),
                            });
                        }
                    }
                }
            }
            ConstructionKind::Abstract => {}
        }
        for b in &c.bindings {
            check_meaning_path(g, c, &b.left, out);
            match &b.right {
                BindingTarget::Path(p) => check_meaning_path(g, c, p, out),
                BindingTarget::Atom(a) => {
                    if !g.ontology.contains_key(a) && !is_numeric_atom(a) {
                        out.error(&c.location, format!("unknown atom {a} in {}", c.name));
                    }
                }
            }
        }
    }
}

fn check_meaning_path(g: &Grammar, c: &super::Construction, path: &MeaningPath, out: &mut Collector) {
    let schema = match &path.head {
        PathHead::SelfRef => c.meaning.clone(),
        PathHead::Label(l) => match c.constituent(l) {
            Some(k) => match g.constructions.get(&k.ty) {
                Some(kc) => kc.meaning.clone(),
                None => return,
            },
            None => {
                out.error(&c.location, format!("unknown constituent label {l} in {}", c.name));
                return;
            }
        },
    };
    if !g.schemas.contains_key(&schema) {
        return;
    }
    if let Err(msg) = resolve_meaning_roles(g, &schema, &path.roles) {
        out.error(&c.location, msg);
    }
}
