//! The problem solver: dispatches n-tuples against the situation model,
//! grounds referents, asks clarification questions, evaluates
//! conditionals, answers queries, applies assertions and plans robot
//! commands.

mod describe;
mod ground;
mod plan;

use std::collections::{BTreeMap, BTreeSet};

use crate::cqi::CqiCommand;
use crate::specializer::{Assertion, Body, Claim, Command, NTuple, Query, RefId};
use crate::world::{SituationModel, WorldError};

pub use describe::{describe, describe_bare};
pub use ground::{ground, ground_place, make_clarification, refine_descriptor, Attribute, Grounding, RefineError};
pub use plan::{approach, plan_action, PlanArgs, PlanError, STANDOFF};

use describe::{join_and, words};

pub const ABANDON_NOTICE: &str = "Abandoning previous request.";

/// Which actions the robot can perform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapabilityRegistry {
    actions: BTreeMap<String, bool>,
}

impl Default for CapabilityRegistry {
    fn default() -> Self {
        let mut actions = BTreeMap::new();
        for a in ["bring", "pick_up", "get", "move_self"] {
            actions.insert(a.to_string(), true);
        }
        for a in ["move", "pour", "order"] {
            actions.insert(a.to_string(), false);
        }
        CapabilityRegistry { actions }
    }
}

impl CapabilityRegistry {
    pub fn set(&mut self, action: &str, available: bool) {
        self.actions.insert(action.to_string(), available);
    }

    pub fn supports(&self, action: &str) -> bool {
        self.actions.get(action).copied().unwrap_or(false)
    }

    /// Ability over an action, optionally suffixed with its object
    /// (`order_pizza`): an exact entry wins, else the longest action prefix.
    pub fn can(&self, subject: &str) -> bool {
        if let Some(v) = self.actions.get(subject) {
            return *v;
        }
        self.actions
            .iter()
            .filter(|(a, _)| subject.strip_prefix(a.as_str()).is_some_and(|rest| rest.starts_with('_')))
            .max_by_key(|(a, _)| a.len())
            .is_some_and(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clarification {
    /// The request waiting on the answer.
    pub pending: NTuple,
    /// The descriptor that failed to ground uniquely.
    pub unresolved: RefId,
    pub candidates: BTreeSet<String>,
    pub asked: Attribute,
    pub question: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum DialogState {
    #[default]
    Idle,
    AwaitingClarification(Clarification),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub replies: Vec<String>,
    /// Empty whenever a clarification is pending.
    pub commands: Vec<CqiCommand>,
    pub state: DialogState,
    pub model: SituationModel,
    /// The request could not be served.
    pub failed: bool,
}

enum Step {
    Done {
        reply: String,
        commands: Vec<CqiCommand>,
        failed: bool,
    },
    Clarify {
        pending: NTuple,
        unresolved: RefId,
        candidates: BTreeSet<String>,
    },
}

impl Step {
    fn reply(text: impl Into<String>) -> Step {
        Step::Done {
            reply: text.into(),
            commands: Vec::new(),
            failed: false,
        }
    }

    fn fail(text: impl Into<String>) -> Step {
        Step::Done {
            reply: text.into(),
            commands: Vec::new(),
            failed: true,
        }
    }
}

fn world_failure(e: &WorldError) -> Step {
    match e {
        WorldError::NestedAmbiguity(d) => Step::fail(format!("I am not sure which {} you mean.", words(&d.onto_type))),
        other => Step::fail(format!("I cannot do that: {other}.")),
    }
}

/// Process one n-tuple in the current dialog state.
pub fn handle_ntuple(
    n: &NTuple,
    st: &DialogState,
    m: &SituationModel,
    caps: &CapabilityRegistry,
) -> SolverOutcome {
    let mut model = m.clone();
    let mut replies = Vec::new();
    let DialogState::AwaitingClarification(c) = st else {
        let step = dispatch(n.clone(), &mut model, caps);
        return finish(step, None, replies, model);
    };
    let answer = match &n.body {
        Body::Fragment { referent } => Some((*referent, None)),
        Body::Assertion(Assertion { subject, claim }) => Some((*subject, Some(claim))),
        _ => None,
    };
    if let Some((answer_id, claim)) = answer {
        let mut pending = c.pending.clone();
        return match refine_descriptor(
            model.ontology(),
            &mut pending.referents,
            c.unresolved,
            &n.referents,
            answer_id,
            claim,
        ) {
            Ok(()) => {
                let step = dispatch(pending, &mut model, caps);
                finish(step, Some(c), replies, model)
            }
            Err(e) => SolverOutcome {
                replies: vec![format!("That does not fit: {e}."), c.question.clone()],
                commands: Vec::new(),
                state: st.clone(),
                model,
                failed: true,
            },
        };
    }
    let restatement = match (&n.body, &c.pending.body) {
        (Body::Command(a), Body::Command(b)) => a.action == b.action,
        _ => false,
    };
    if !restatement {
        replies.push(ABANDON_NOTICE.to_string());
    }
    let step = dispatch(n.clone(), &mut model, caps);
    finish(step, None, replies, model)
}

fn finish(step: Step, prev: Option<&Clarification>, mut replies: Vec<String>, model: SituationModel) -> SolverOutcome {
    match step {
        Step::Done {
            reply,
            commands,
            failed,
        } => {
            replies.push(reply);
            SolverOutcome {
                replies,
                commands,
                state: DialogState::Idle,
                model,
                failed,
            }
        }
        Step::Clarify {
            pending,
            unresolved,
            candidates,
        } => {
            let (question, asked) = match prev {
                Some(p) if p.unresolved == unresolved && p.candidates == candidates => (p.question.clone(), p.asked),
                Some(p) if p.unresolved == unresolved => make_clarification(&candidates, p.asked, &model),
                _ => make_clarification(&candidates, Attribute::None, &model),
            };
            replies.push(question.clone());
            SolverOutcome {
                replies,
                commands: Vec::new(),
                state: DialogState::AwaitingClarification(Clarification {
                    pending,
                    unresolved,
                    candidates,
                    asked,
                    question,
                }),
                model,
                failed: false,
            }
        }
    }
}

fn dispatch(mut n: NTuple, m: &mut SituationModel, caps: &CapabilityRegistry) -> Step {
    match n.body.clone() {
        Body::Command(c) => command(n, &c, m, caps),
        Body::Query(q) => Step::reply(answer_query(&n, &q, m, caps)),
        Body::Assertion(a) => assertion(n, &a, m),
        Body::Conditional(c) => match evaluate_condition(&n, c.condition, m) {
            Some(witness) => {
                n.referent_mut(c.condition).referent_id = Some(witness);
                dispatch(n.with_body(c.then.clone()), m, caps)
            }
            None => match &c.otherwise {
                Some(body) => dispatch(n.with_body(body.clone()), m, caps),
                None => Step::reply("There is nothing to do."),
            },
        },
        Body::Fragment { referent } => {
            Step::reply(format!("What should I do with {}?", describe(&n.referents, referent)))
        }
    }
}

/// True when something matches the condition's descriptor; the witness
/// is the first match by id.
pub fn evaluate_condition(n: &NTuple, condition: RefId, m: &SituationModel) -> Option<String> {
    m.objects_matching(&n.referents, condition).ok()?.into_iter().next()
}

/// Ground one descriptor, recording the result in the arena. `None` means
/// grounded; otherwise the step to return.
fn ground_into(n: &mut NTuple, id: RefId, place: bool, m: &SituationModel) -> Option<Step> {
    let result = if place {
        ground_place(&n.referents, id, m)
    } else {
        ground(&n.referents, id, m)
    };
    match result {
        Ok(Grounding::Unique(found)) => {
            n.referent_mut(id).referent_id = Some(found);
            None
        }
        Ok(Grounding::Empty) => Some(Step::fail(format!("No matching object: {}.", describe(&n.referents, id)))),
        Ok(Grounding::Ambiguous(candidates)) => Some(Step::Clarify {
            pending: n.clone(),
            unresolved: id,
            candidates,
        }),
        Err(e) => Some(world_failure(&e)),
    }
}

fn command(mut n: NTuple, c: &Command, m: &SituationModel, caps: &CapabilityRegistry) -> Step {
    if !caps.supports(&c.action) {
        let what = c
            .acted_upon
            .map(|a| format!(" {}", describe(&n.referents, a)))
            .unwrap_or_default();
        return Step::fail(format!("Sorry, I cannot {}{what}.", words(&c.action)));
    }
    if let (Some(obj), Some(src)) = (c.acted_upon, c.source) {
        if !n.referent(obj).relations.iter().any(|(r, l)| r == "in" && *l == src) {
            n.referent_mut(obj).relations.push(("in".to_string(), src));
        }
    }
    let mut args = PlanArgs {
        object: None,
        goal: None,
    };
    if let Some(obj) = c.acted_upon {
        if let Some(step) = ground_into(&mut n, obj, false, m) {
            return step;
        }
        args.object = n.referent(obj).referent_id.clone();
    }
    if let Some(goal) = c.goal {
        if let Some(step) = ground_into(&mut n, goal, true, m) {
            return step;
        }
        args.goal = n.referent(goal).referent_id.as_deref().and_then(|g| m.place(g));
    }
    match plan_action(&c.action, &args, m) {
        Ok(commands) => Step::Done {
            reply: "OK.".into(),
            commands,
            failed: false,
        },
        Err(e) => Step::fail(e.to_string()),
    }
}

/// Reply to a which- or ability-question.
pub fn answer_query(n: &NTuple, q: &Query, m: &SituationModel, caps: &CapabilityRegistry) -> String {
    match q {
        Query::Ability { subject } => {
            if caps.can(subject) {
                format!("Yes, I can {}.", words(subject))
            } else {
                format!("No, I cannot {}.", words(subject))
            }
        }
        Query::Which {
            subject,
            property,
            relation,
        } => {
            let mut arena = n.referents.clone();
            if let Some((k, v)) = property {
                arena[subject.0].properties.insert(k.clone(), v.clone());
            }
            if let Some((rel, lm)) = relation {
                arena[subject.0].relations.push((rel.clone(), *lm));
            }
            let found: Vec<String> = match m.objects_matching(&arena, *subject) {
                Ok(found) => found.into_iter().collect(),
                Err(e) => return format!("I cannot tell: {e}."),
            };
            let what = describe_bare(&arena, *subject);
            match found.len() {
                0 => "None.".into(),
                1 => format!("The {what} is {}.", found[0]),
                _ => format!("The {what} is one of {}.", join_and(&found).replace(" and ", " or ")),
            }
        }
    }
}

fn assertion(mut n: NTuple, a: &Assertion, m: &mut SituationModel) -> Step {
    if let Some(step) = ground_into(&mut n, a.subject, false, m) {
        return step;
    }
    let subject = n.referent(a.subject).referent_id.clone().expect("grounded above");
    match apply_assertion(&n, &subject, &a.claim, m) {
        Ok(()) => Step::reply("OK."),
        Err(e) => Step::fail(e),
    }
}

/// Make a claim about a grounded object true in the model. Relations move
/// the object to where the relation holds.
pub fn apply_assertion(n: &NTuple, subject: &str, claim: &Claim, m: &mut SituationModel) -> Result<(), String> {
    match claim {
        Claim::Exists => Ok(()),
        Claim::Property { key, value } => {
            let o = m
                .objects
                .get_mut(subject)
                .ok_or_else(|| format!("I do not know {subject}."))?;
            o.properties.insert(key.clone(), value.clone());
            Ok(())
        }
        Claim::Relation { relation, landmark } => {
            if m.robot.holding.as_deref() == Some(subject) {
                return Err(format!("I am holding {subject}."));
            }
            let places = m.landmark_places(&n.referents, *landmark).map_err(|e| match e {
                WorldError::NestedAmbiguity(d) => format!("I am not sure which {} you mean.", words(&d.onto_type)),
                other => other.to_string(),
            })?;
            let place = places
                .into_iter()
                .find(|p| !matches!(p, crate::world::Place::Object(o) if o == subject))
                .ok_or_else(|| format!("No matching object: {}.", describe(&n.referents, *landmark)))?;
            let (x, y, level) = plan::placement(relation, &place, m)
                .ok_or_else(|| format!("I cannot place anything {}.", words(relation)))?;
            let o = m.objects.get_mut(subject).expect("grounded object exists");
            o.x = x;
            o.y = y;
            o.level = level;
            Ok(())
        }
    }
}
