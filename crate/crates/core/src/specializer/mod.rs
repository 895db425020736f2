//! Template-driven extraction of n-tuples from resolved SemSpecs.
//!
//! The root schema of a SemSpec selects a template, and the template reads
//! roles by name. Referent descriptors live in an arena on the [`NTuple`]
//! and are referenced by [`RefId`]; roles that share a slot in the SemSpec
//! share one descriptor, so grounding it once grounds every mention.

mod text;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analyzer::{InstanceId, SemSpec, SlotValue};
use crate::grammar::Grammar;

pub use text::{ntuple_to_canonical_text, parse_canonical_text, TextError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RefId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Determiner {
    Definite,
    Indefinite,
    /// The "which" of a question.
    Wh,
    /// "me": the person addressing the robot.
    Speaker,
}

impl Determiner {
    pub fn as_str(self) -> &'static str {
        match self {
            Determiner::Definite => "definite",
            Determiner::Indefinite => "indefinite",
            Determiner::Wh => "wh",
            Determiner::Speaker => "speaker",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "definite" => Determiner::Definite,
            "indefinite" => Determiner::Indefinite,
            "wh" => Determiner::Wh,
            "speaker" => Determiner::Speaker,
            _ => return None,
        })
    }
}

/// What the user said about one thing in the world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReferentDescriptor {
    pub onto_type: String,
    pub determiner: Determiner,
    pub properties: BTreeMap<String, String>,
    pub relations: Vec<(String, RefId)>,
    /// Set once the solver has grounded the descriptor.
    pub referent_id: Option<String>,
}

impl ReferentDescriptor {
    pub fn new(onto_type: impl Into<String>, determiner: Determiner) -> Self {
        Self {
            onto_type: onto_type.into(),
            determiner,
            properties: BTreeMap::new(),
            relations: Vec::new(),
            referent_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Command {
    pub action: String,
    pub acted_upon: Option<RefId>,
    pub goal: Option<RefId>,
    pub source: Option<RefId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "query_type", rename_all = "snake_case")]
pub enum Query {
    Which {
        subject: RefId,
        property: Option<(String, String)>,
        relation: Option<(String, RefId)>,
    },
    /// `subject` names an action, e.g. `order_pizza`.
    Ability { subject: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Relation { relation: String, landmark: RefId },
    Property { key: String, value: String },
    Exists,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub subject: RefId,
    pub claim: Claim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conditional {
    /// Holds when some object matches this descriptor.
    pub condition: RefId,
    pub then: Body,
    pub otherwise: Option<Body>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Command(Command),
    Query(Query),
    Assertion(Assertion),
    Conditional(Box<Conditional>),
    /// A bare noun phrase, typically the answer to a clarification question.
    Fragment { referent: RefId },
}

impl Body {
    pub fn kind(&self) -> &'static str {
        match self {
            Body::Command(_) => "command",
            Body::Query(_) => "query",
            Body::Assertion(_) => "assertion",
            Body::Conditional(_) => "conditional",
            Body::Fragment { .. } => "fragment",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NTuple {
    /// Addressed robot; empty when the utterance names none.
    pub protagonist: String,
    pub body: Body,
    pub referents: Vec<ReferentDescriptor>,
}

impl NTuple {
    pub fn referent(&self, id: RefId) -> &ReferentDescriptor {
        &self.referents[id.0]
    }

    pub fn referent_mut(&mut self, id: RefId) -> &mut ReferentDescriptor {
        &mut self.referents[id.0]
    }

    /// A copy of this tuple with a different body, sharing the arena.
    pub fn with_body(&self, body: Body) -> NTuple {
        NTuple {
            protagonist: self.protagonist.clone(),
            body,
            referents: self.referents.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecializeError {
    #[error("no template for {0}")]
    NoTemplate(String),
    #[error("{schema} is missing its {role}")]
    MissingRole { schema: String, role: String },
}

struct Extractor<'a> {
    g: &'a Grammar,
    s: &'a SemSpec,
    refs: BTreeMap<InstanceId, RefId>,
    referents: Vec<ReferentDescriptor>,
}

impl<'a> Extractor<'a> {
    fn schema(&self, id: InstanceId) -> &str {
        &self.s.instance(id).schema
    }

    fn is(&self, id: InstanceId, schema: &str) -> bool {
        self.g.is_subtype(self.schema(id), schema)
    }

    fn atom(&self, id: InstanceId, role: &str) -> Option<String> {
        self.s.role_atom(id, role).map(str::to_string)
    }

    fn child(&self, id: InstanceId, role: &str) -> Option<InstanceId> {
        self.s.role_instance(id, role)
    }

    fn required_atom(&self, id: InstanceId, role: &str) -> Result<String, SpecializeError> {
        self.atom(id, role).ok_or_else(|| self.missing(id, role))
    }

    fn required_child(&self, id: InstanceId, role: &str) -> Result<InstanceId, SpecializeError> {
        self.child(id, role).ok_or_else(|| self.missing(id, role))
    }

    fn missing(&self, id: InstanceId, role: &str) -> SpecializeError {
        SpecializeError::MissingRole {
            schema: self.schema(id).to_string(),
            role: role.to_string(),
        }
    }

    fn descriptor(&mut self, id: InstanceId) -> RefId {
        if let Some(r) = self.refs.get(&id) {
            return *r;
        }
        let rid = RefId(self.referents.len());
        self.refs.insert(id, rid);
        let top = self.g.ontology_top().unwrap_or("entity").to_string();
        let determiner = match self.s.role_atom(id, "givenness") {
            Some(g) if self.g.is_subtype(g, "indefinite") => Determiner::Indefinite,
            Some(g) if self.g.is_subtype(g, "wh") => Determiner::Wh,
            Some(g) if self.g.is_subtype(g, "speaker") => Determiner::Speaker,
            _ => Determiner::Definite,
        };
        let mut d = ReferentDescriptor::new(self.atom(id, "category").unwrap_or(top), determiner);
        let vocab = self.g.property_vocabulary();
        let schema = self.schema(id).to_string();
        for (role, slot) in &self.s.instance(id).roles {
            let Some(ty) = self.g.role_type(&schema, role) else { continue };
            if let SlotValue::Atom(v) = self.s.slot(*slot) {
                if vocab.iter().any(|p| self.g.is_subtype(ty, p)) {
                    d.properties.insert(role.clone(), v.clone());
                }
            }
        }
        self.referents.push(d);
        if let Some(m) = self.child(id, "modifier") {
            if let Some((rel, landmark)) = self.relation(m) {
                self.referents[rid.0].relations.push((rel, landmark));
            }
        }
        rid
    }

    fn relation(&mut self, rel: InstanceId) -> Option<(String, RefId)> {
        let name = self.atom(rel, "relation")?;
        let landmark = self.child(rel, "landmark")?;
        Some((name, self.descriptor(landmark)))
    }

    fn first_property(&mut self, rd: InstanceId) -> Option<(String, String)> {
        let r = self.descriptor(rd);
        self.referents[r.0]
            .properties
            .iter()
            .next()
            .map(|(k, v)| (k.clone(), v.clone()))
    }

    fn body(&mut self, id: InstanceId) -> Result<Body, SpecializeError> {
        if self.is(id, "CauseEffect") {
            let action = self.required_atom(id, "actionary")?;
            let acted_upon = Some(self.descriptor(self.required_child(id, "affectedEntity")?));
            let (goal, source) = match self.child(id, "affectedProcess") {
                Some(mp) => self.path_ends(mp),
                None => (None, None),
            };
            return Ok(Body::Command(Command {
                action,
                acted_upon,
                goal,
                source,
            }));
        }
        if self.is(id, "MotionPath") {
            let (goal, source) = self.path_ends(id);
            if goal.is_none() && source.is_none() {
                return Err(self.missing(id, "spg"));
            }
            return Ok(Body::Command(Command {
                action: "move_self".into(),
                acted_upon: None,
                goal,
                source,
            }));
        }
        if self.is(id, "EstablishHold") {
            let action = self.required_atom(id, "actionary")?;
            let acted_upon = Some(self.descriptor(self.required_child(id, "actedUpon")?));
            return Ok(Body::Command(Command {
                action,
                acted_upon,
                goal: None,
                source: None,
            }));
        }
        if self.is(id, "Predication") {
            let subject = self.descriptor(self.required_child(id, "subject")?);
            let claim = self.claim(id, subject);
            return Ok(Body::Assertion(Assertion { subject, claim }));
        }
        if self.is(id, "WhQuery") {
            let subject = self.descriptor(self.required_child(id, "specified")?);
            let property = match self.child(id, "predicate") {
                Some(p) => self.first_property(p),
                None => None,
            };
            let relation = match self.child(id, "relation") {
                Some(r) => self.relation(r),
                None => None,
            };
            return Ok(Body::Query(Query::Which {
                subject,
                property,
                relation,
            }));
        }
        if self.is(id, "AbilityQuery") {
            let process = self.required_child(id, "ability")?;
            let mut subject = self.required_atom(process, "actionary")?;
            let object = self
                .child(process, "affectedEntity")
                .or_else(|| self.child(process, "actedUpon"));
            if let Some(category) = object.and_then(|o| self.atom(o, "category")) {
                subject = format!("{subject}_{category}");
            }
            return Ok(Body::Query(Query::Ability { subject }));
        }
        if self.is(id, "Conditional") {
            let pred = self.required_child(id, "condition")?;
            let condition = self.descriptor(self.required_child(pred, "subject")?);
            // Fold the predicated relation or property into the subject:
            // the condition holds when something matches it.
            match self.claim(pred, condition) {
                Claim::Relation { relation, landmark } => {
                    self.referents[condition.0].relations.push((relation, landmark));
                }
                Claim::Property { key, value } => {
                    self.referents[condition.0].properties.insert(key, value);
                }
                Claim::Exists => {}
            }
            let then = self.body(self.required_child(id, "thenProcess")?)?;
            let otherwise = match self.child(id, "elseProcess") {
                Some(e) => Some(self.body(e)?),
                None => None,
            };
            return Ok(Body::Conditional(Box::new(Conditional {
                condition,
                then,
                otherwise,
            })));
        }
        if self.is(id, "RD") {
            return Ok(Body::Fragment {
                referent: self.descriptor(id),
            });
        }
        Err(SpecializeError::NoTemplate(self.schema(id).to_string()))
    }

    /// What a predication says about its subject. A modifier on the subject
    /// stands in for the claim when nothing else is predicated.
    fn claim(&mut self, pred: InstanceId, subject: RefId) -> Claim {
        if let Some((relation, landmark)) = self.child(pred, "relation").and_then(|r| self.relation(r)) {
            return Claim::Relation { relation, landmark };
        }
        if let Some((key, value)) = self.child(pred, "predicate").and_then(|p| self.first_property(p)) {
            return Claim::Property { key, value };
        }
        let d = &mut self.referents[subject.0];
        if d.relations.len() == 1 {
            let (relation, landmark) = d.relations.remove(0);
            return Claim::Relation { relation, landmark };
        }
        Claim::Exists
    }

    fn path_ends(&mut self, motion: InstanceId) -> (Option<RefId>, Option<RefId>) {
        let Some(spg) = self.child(motion, "spg") else {
            return (None, None);
        };
        let goal = self.child(spg, "goal").map(|g| self.descriptor(g));
        let source = self.child(spg, "source").map(|s| self.descriptor(s));
        (goal, source)
    }
}

/// Turn a resolved SemSpec into an n-tuple.
pub fn specialize(g: &Grammar, s: &SemSpec) -> Result<NTuple, SpecializeError> {
    let mut ex = Extractor {
        g,
        s,
        refs: BTreeMap::new(),
        referents: Vec::new(),
    };
    let body = ex.body(s.root)?;
    let protagonist = s.role_atom(s.root, "protagonist").unwrap_or_default().to_string();
    Ok(text::normalize(NTuple {
        protagonist,
        body,
        referents: ex.referents,
    }))
}
