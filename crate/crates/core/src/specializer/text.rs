//! Canonical text form of n-tuples: key-sorted `key: value` lines with
//! two-space indentation. A descriptor is written in full at its first
//! occurrence, tagged `ref: N`, and later occurrences are just `ref: N`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{
    Assertion, Body, Claim, Command, Conditional, Determiner, NTuple, Query, RefId,
    ReferentDescriptor,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TextError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(String),
    Map(BTreeMap<String, Node>),
    Ref(RefId),
}

fn map(entries: Vec<(&str, Node)>) -> Node {
    Node::Map(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn leaf(s: impl Into<String>) -> Node {
    Node::Leaf(s.into())
}

fn body_node(b: &Body) -> Node {
    let mut e: Vec<(&str, Node)> = vec![("kind", leaf(b.kind()))];
    match b {
        Body::Command(c) => {
            e.push(("action", leaf(&c.action)));
            for (k, v) in [("actedUpon", c.acted_upon), ("goal", c.goal), ("source", c.source)] {
                if let Some(r) = v {
                    e.push((k, Node::Ref(r)));
                }
            }
        }
        Body::Query(Query::Which {
            subject,
            property,
            relation,
        }) => {
            e.push(("query_type", leaf("which")));
            e.push(("subject", Node::Ref(*subject)));
            if let Some((name, value)) = property {
                e.push(("property", map(vec![("name", leaf(name)), ("value", leaf(value))])));
            }
            if let Some((rel, lm)) = relation {
                e.push(("relation", relation_node(rel, *lm)));
            }
        }
        Body::Query(Query::Ability { subject }) => {
            e.push(("query_type", leaf("ability")));
            e.push(("subject", leaf(subject)));
        }
        Body::Assertion(a) => {
            e.push(("subject", Node::Ref(a.subject)));
            match &a.claim {
                Claim::Relation { relation, landmark } => e.push(("relation", relation_node(relation, *landmark))),
                Claim::Property { key, value } => {
                    e.push(("property", map(vec![("name", leaf(key)), ("value", leaf(value))])))
                }
                Claim::Exists => e.push(("exists", leaf("true"))),
            }
        }
        Body::Conditional(c) => {
            e.push(("condition", Node::Ref(c.condition)));
            e.push(("then", body_node(&c.then)));
            if let Some(o) = &c.otherwise {
                e.push(("else", body_node(o)));
            }
        }
        Body::Fragment { referent } => e.push(("referent", Node::Ref(*referent))),
    }
    map(e)
}

fn relation_node(rel: &str, landmark: RefId) -> Node {
    map(vec![("relation", leaf(rel)), ("landmark", Node::Ref(landmark))])
}

fn descriptor_node(d: &ReferentDescriptor, number: usize) -> Node {
    let mut e = vec![
        ("ref", leaf(number.to_string())),
        ("onto_type", leaf(&d.onto_type)),
        ("determiner", leaf(d.determiner.as_str())),
    ];
    if !d.properties.is_empty() {
        e.push((
            "properties",
            Node::Map(d.properties.iter().map(|(k, v)| (k.clone(), leaf(v))).collect()),
        ));
    }
    if !d.relations.is_empty() {
        let rels = d
            .relations
            .iter()
            .enumerate()
            .map(|(i, (rel, lm))| (format!("{i:03}"), relation_node(rel, *lm)))
            .collect();
        e.push(("relations", Node::Map(rels)));
    }
    if let Some(id) = &d.referent_id {
        e.push(("referent_id", leaf(id)));
    }
    map(e)
}

/// Replace descriptor placeholders in key order, numbering descriptors by
/// first occurrence. Returns the old-to-new numbering.
fn expand(node: &mut Node, n: &NTuple, order: &mut Vec<RefId>) {
    match node {
        Node::Leaf(_) => {}
        Node::Ref(r) => {
            let r = *r;
            if let Some(k) = order.iter().position(|x| *x == r) {
                *node = map(vec![("ref", leaf(k.to_string()))]);
            } else {
                order.push(r);
                let mut full = descriptor_node(n.referent(r), order.len() - 1);
                expand(&mut full, n, order);
                *node = full;
            }
        }
        Node::Map(m) => {
            for v in m.values_mut() {
                expand(v, n, order);
            }
        }
    }
}

fn tree(n: &NTuple) -> (Node, Vec<RefId>) {
    let mut root = body_node(&n.body);
    if let Node::Map(m) = &mut root {
        if !n.protagonist.is_empty() {
            m.insert("protagonist".into(), leaf(&n.protagonist));
        }
    }
    let mut order = Vec::new();
    expand(&mut root, n, &mut order);
    (root, order)
}

fn render(node: &Node, depth: usize, out: &mut String) {
    if let Node::Map(m) = node {
        for (k, v) in m {
            let indent = "  ".repeat(depth);
            match v {
                Node::Leaf(s) => {
                    let _ = writeln!(out, "{indent}{k}: {s}");
                }
                _ => {
                    let _ = writeln!(out, "{indent}{k}:");
                    render(v, depth + 1, out);
                }
            }
        }
    }
}

pub fn ntuple_to_canonical_text(n: &NTuple) -> String {
    let (root, _) = tree(n);
    let mut out = String::new();
    render(&root, 0, &mut out);
    out
}

fn remap_body(b: &Body, f: &impl Fn(RefId) -> RefId) -> Body {
    match b {
        Body::Command(c) => Body::Command(Command {
            action: c.action.clone(),
            acted_upon: c.acted_upon.map(f),
            goal: c.goal.map(f),
            source: c.source.map(f),
        }),
        Body::Query(Query::Which {
            subject,
            property,
            relation,
        }) => Body::Query(Query::Which {
            subject: f(*subject),
            property: property.clone(),
            relation: relation.as_ref().map(|(r, l)| (r.clone(), f(*l))),
        }),
        Body::Query(q) => Body::Query(q.clone()),
        Body::Assertion(a) => Body::Assertion(Assertion {
            subject: f(a.subject),
            claim: match &a.claim {
                Claim::Relation { relation, landmark } => Claim::Relation {
                    relation: relation.clone(),
                    landmark: f(*landmark),
                },
                other => other.clone(),
            },
        }),
        Body::Conditional(c) => Body::Conditional(Box::new(Conditional {
            condition: f(c.condition),
            then: remap_body(&c.then, f),
            otherwise: c.otherwise.as_ref().map(|o| remap_body(o, f)),
        })),
        Body::Fragment { referent } => Body::Fragment { referent: f(*referent) },
    }
}

/// Reorder the referent arena into canonical-text order, dropping
/// descriptors nothing refers to.
pub(super) fn normalize(n: NTuple) -> NTuple {
    let (_, order) = tree(&n);
    let new_of: BTreeMap<RefId, RefId> = order.iter().enumerate().map(|(i, r)| (*r, RefId(i))).collect();
    let f = |r: RefId| new_of[&r];
    let referents = order
        .iter()
        .map(|r| {
            let mut d = n.referent(*r).clone();
            d.relations = d.relations.into_iter().map(|(rel, l)| (rel, f(l))).collect();
            d
        })
        .collect();
    NTuple {
        protagonist: n.protagonist.clone(),
        body: remap_body(&n.body, &f),
        referents,
    }
}

impl NTuple {
    /// The same tuple with its arena in canonical order.
    pub fn normalized(self) -> NTuple {
        normalize(self)
    }
}

fn parse_tree(text: &str) -> Result<Node, TextError> {
    let mut stack: Vec<(usize, BTreeMap<String, Node>, String)> = vec![(0, BTreeMap::new(), String::new())];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let spaces = raw.len() - raw.trim_start_matches(' ').len();
        if spaces % 2 != 0 {
            return Err(TextError {
                line,
                message: "odd indentation".into(),
            });
        }
        let depth = spaces / 2;
        while stack.len() - 1 > depth {
            let (_, m, key) = stack.pop().unwrap();
            stack.last_mut().unwrap().1.insert(key, Node::Map(m));
        }
        if depth != stack.len() - 1 {
            return Err(TextError {
                line,
                message: "unexpected indentation".into(),
            });
        }
        let body = raw.trim();
        let Some((key, value)) = body.split_once(':') else {
            return Err(TextError {
                line,
                message: "expected `key: value`".into(),
            });
        };
        let value = value.trim();
        if value.is_empty() {
            stack.push((depth + 1, BTreeMap::new(), key.to_string()));
        } else {
            stack.last_mut().unwrap().1.insert(key.to_string(), leaf(value));
        }
    }
    while stack.len() > 1 {
        let (_, m, key) = stack.pop().unwrap();
        stack.last_mut().unwrap().1.insert(key, Node::Map(m));
    }
    Ok(Node::Map(stack.pop().unwrap().1))
}

struct Reader {
    referents: Vec<Option<ReferentDescriptor>>,
}

fn bad(message: impl Into<String>) -> TextError {
    TextError {
        line: 0,
        message: message.into(),
    }
}

fn as_map(node: &Node) -> Result<&BTreeMap<String, Node>, TextError> {
    match node {
        Node::Map(m) => Ok(m),
        _ => Err(bad("expected a nested block")),
    }
}

fn get_leaf<'a>(m: &'a BTreeMap<String, Node>, key: &str) -> Result<&'a str, TextError> {
    match m.get(key) {
        Some(Node::Leaf(s)) => Ok(s),
        _ => Err(bad(format!("missing {key}"))),
    }
}

impl Reader {
    fn descriptor(&mut self, node: &Node) -> Result<RefId, TextError> {
        let m = as_map(node)?;
        let k: usize = get_leaf(m, "ref")?.parse().map_err(|_| bad("bad ref"))?;
        if m.len() == 1 {
            return match self.referents.get(k) {
                Some(Some(_)) => Ok(RefId(k)),
                _ => Err(bad(format!("ref {k} used before its definition"))),
            };
        }
        if k != self.referents.len() {
            return Err(bad(format!("ref {k} out of order")));
        }
        self.referents.push(None);
        let determiner = Determiner::parse(get_leaf(m, "determiner")?).ok_or_else(|| bad("bad determiner"))?;
        let mut d = ReferentDescriptor::new(get_leaf(m, "onto_type")?, determiner);
        if let Some(p) = m.get("properties") {
            for (key, v) in as_map(p)? {
                match v {
                    Node::Leaf(v) => {
                        d.properties.insert(key.clone(), v.clone());
                    }
                    _ => return Err(bad("property values are scalars")),
                }
            }
        }
        if let Some(r) = m.get("relations") {
            for v in as_map(r)?.values() {
                d.relations.push(self.relation(v)?);
            }
        }
        if let Ok(id) = get_leaf(m, "referent_id") {
            d.referent_id = Some(id.to_string());
        }
        self.referents[k] = Some(d);
        Ok(RefId(k))
    }

    fn relation(&mut self, node: &Node) -> Result<(String, RefId), TextError> {
        let m = as_map(node)?;
        let rel = get_leaf(m, "relation")?.to_string();
        let lm = self.descriptor(m.get("landmark").ok_or_else(|| bad("missing landmark"))?)?;
        Ok((rel, lm))
    }

    fn property(&self, node: &Node) -> Result<(String, String), TextError> {
        let m = as_map(node)?;
        Ok((get_leaf(m, "name")?.to_string(), get_leaf(m, "value")?.to_string()))
    }

    fn opt_descriptor(&mut self, m: &BTreeMap<String, Node>, key: &str) -> Result<Option<RefId>, TextError> {
        m.get(key).map(|n| self.descriptor(n)).transpose()
    }

    fn required(&mut self, m: &BTreeMap<String, Node>, key: &str) -> Result<RefId, TextError> {
        self.opt_descriptor(m, key)?.ok_or_else(|| bad(format!("missing {key}")))
    }

    /// Keys are visited in sorted order, the order they were numbered in.
    fn body(&mut self, node: &Node) -> Result<Body, TextError> {
        let m = as_map(node)?;
        Ok(match get_leaf(m, "kind")? {
            "command" => {
                let acted_upon = self.opt_descriptor(m, "actedUpon")?;
                let goal = self.opt_descriptor(m, "goal")?;
                let source = self.opt_descriptor(m, "source")?;
                Body::Command(Command {
                    action: get_leaf(m, "action")?.to_string(),
                    acted_upon,
                    goal,
                    source,
                })
            }
            "query" => match get_leaf(m, "query_type")? {
                "which" => {
                    let property = m.get("property").map(|p| self.property(p)).transpose()?;
                    let relation = m.get("relation").map(|r| self.relation(r)).transpose()?;
                    let subject = self.required(m, "subject")?;
                    Body::Query(Query::Which {
                        subject,
                        property,
                        relation,
                    })
                }
                "ability" => Body::Query(Query::Ability {
                    subject: get_leaf(m, "subject")?.to_string(),
                }),
                other => return Err(bad(format!("unknown query type {other}"))),
            },
            "assertion" => {
                let claim = if m.contains_key("exists") {
                    Claim::Exists
                } else if let Some(p) = m.get("property") {
                    let (key, value) = self.property(p)?;
                    Claim::Property { key, value }
                } else if let Some(r) = m.get("relation") {
                    let (relation, landmark) = self.relation(r)?;
                    Claim::Relation { relation, landmark }
                } else {
                    return Err(bad("assertion without a claim"));
                };
                let subject = self.required(m, "subject")?;
                Body::Assertion(Assertion { subject, claim })
            }
            "conditional" => {
                let condition = self.required(m, "condition")?;
                let otherwise = m.get("else").map(|e| self.body(e)).transpose()?;
                let then = self.body(m.get("then").ok_or_else(|| bad("missing then"))?)?;
                Body::Conditional(Box::new(Conditional {
                    condition,
                    then,
                    otherwise,
                }))
            }
            "fragment" => Body::Fragment {
                referent: self.required(m, "referent")?,
            },
            other => return Err(bad(format!("unknown kind {other}"))),
        })
    }
}

/// Read back the output of [`ntuple_to_canonical_text`].
pub fn parse_canonical_text(text: &str) -> Result<NTuple, TextError> {
    let root = parse_tree(text)?;
    let m = as_map(&root)?;
    let mut reader = Reader { referents: Vec::new() };
    let body = reader.body(&root)?;
    let protagonist = match m.get("protagonist") {
        Some(Node::Leaf(p)) => p.clone(),
        _ => String::new(),
    };
    let referents = reader
        .referents
        .into_iter()
        .map(|d| d.ok_or_else(|| bad("dangling reference")))
        .collect::<Result<_, _>>()?;
    Ok(NTuple {
        protagonist,
        body,
        referents,
    })
}
