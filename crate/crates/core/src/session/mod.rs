//! A dialog session: the full pipeline from utterance text to robot
//! commands, with a transcript of everything said and exchanged.

mod link;

use std::fmt::{self, Write as _};
use std::sync::Arc;

use tracing::debug;

use crate::analyzer::{analyze, resolve_anaphora, tokenize, AnalyzerError};
use crate::cqi::{CqiCommand, CqiData, Envelope, Payload, SimParams, Simulator};
use crate::grammar::Grammar;
use crate::solver::{handle_ntuple, CapabilityRegistry, DialogState};
use crate::specializer::{ntuple_to_canonical_text, specialize, NTuple};
use crate::world::SituationModel;

pub use link::{BuiltinLink, LinkError, RobotLink, TcpLink};

pub const NO_PARSE_REPLY: &str = "I could not parse that.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    User,
    Reply,
    CqiCmd,
    CqiData,
    SemSpec,
    NTuple,
}

impl EventKind {
    pub fn tag(self) -> &'static str {
        match self {
            EventKind::User => "user",
            EventKind::Reply => "robot-reply",
            EventKind::CqiCmd => "cqi-cmd",
            EventKind::CqiData => "cqi-data",
            EventKind::SemSpec => "semspec",
            EventKind::NTuple => "ntuple",
        }
    }

    /// Kinds that appear in the plain transcript.
    pub fn in_transcript(self) -> bool {
        matches!(self, EventKind::User | EventKind::Reply | EventKind::CqiCmd | EventKind::CqiData)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEvent {
    pub kind: EventKind,
    pub text: String,
    /// Robot clock at the time of the event.
    pub stamp: f64,
    /// A reply reporting that the request failed.
    pub error: bool,
}

impl fmt::Display for TranscriptEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.kind.tag(), self.text)
    }
}

/// One line per transcript event; multi-line texts are not expected in
/// the transcript kinds.
pub fn render_transcript(events: &[TranscriptEvent]) -> String {
    let mut out = String::new();
    for e in events.iter().filter(|e| e.kind.in_transcript()) {
        let _ = writeln!(out, "{e}");
    }
    out
}

/// Notified of every event and of every model change.
pub trait SessionObserver: Send {
    fn event(&mut self, _event: &TranscriptEvent) {}
    fn world(&mut self, _model: &SituationModel) {}
    fn ntuple(&mut self, _n: &NTuple) {}
}

pub struct Session {
    grammar: Arc<Grammar>,
    model: SituationModel,
    state: DialogState,
    caps: CapabilityRegistry,
    link: Box<dyn RobotLink>,
    transcript: Vec<TranscriptEvent>,
    seq: u64,
    observer: Option<Box<dyn SessionObserver>>,
}

impl Session {
    /// Open a session and take in the robot's initial report.
    pub fn new(
        grammar: Arc<Grammar>,
        model: SituationModel,
        link: Box<dyn RobotLink>,
        observer: Option<Box<dyn SessionObserver>>,
    ) -> Result<Self, LinkError> {
        let mut s = Session {
            grammar,
            model,
            state: DialogState::Idle,
            caps: CapabilityRegistry::default(),
            link,
            transcript: Vec::new(),
            seq: 0,
            observer,
        };
        if let Some(o) = s.observer.as_mut() {
            o.world(&s.model);
        }
        let mut received = Vec::new();
        s.link.start(&mut |env| received.push(env))?;
        for env in received {
            s.receive(env, true);
        }
        Ok(s)
    }

    /// A session on an in-process simulator seeded with the model's world.
    pub fn builtin(grammar: Arc<Grammar>, model: SituationModel, realtime: bool) -> Self {
        let sim = Simulator::new(model.clone(), SimParams::default());
        Session::new(grammar, model, Box::new(BuiltinLink::new(sim, realtime)), None)
            .expect("the builtin link cannot fail to start")
    }

    pub fn set_observer(&mut self, observer: Box<dyn SessionObserver>) {
        self.observer = Some(observer);
    }

    pub fn model(&self) -> &SituationModel {
        &self.model
    }

    pub fn state(&self) -> &DialogState {
        &self.state
    }

    pub fn capabilities_mut(&mut self) -> &mut CapabilityRegistry {
        &mut self.caps
    }

    pub fn transcript(&self) -> &[TranscriptEvent] {
        &self.transcript
    }

    pub fn has_errors(&self) -> bool {
        self.transcript.iter().any(|e| e.error)
    }

    fn log(&mut self, kind: EventKind, text: String, error: bool) {
        let e = TranscriptEvent {
            kind,
            text,
            stamp: self.link.clock(),
            error,
        };
        debug!(event = %e);
        if let Some(o) = self.observer.as_mut() {
            o.event(&e);
        }
        self.transcript.push(e);
    }

    fn reply(&mut self, text: impl Into<String>, error: bool) {
        self.log(EventKind::Reply, text.into(), error);
    }

    /// Apply one data message to the model. Poses are logged only when
    /// `log_pose` is set, so transcripts show arrivals rather than every
    /// tick.
    fn receive(&mut self, env: Envelope, log_pose: bool) {
        let Payload::Data(d) = &env.payload else {
            return;
        };
        let applied = self.model.apply_data(d);
        let is_pose = matches!(d, CqiData::AtPose { .. });
        if !is_pose || log_pose {
            let line = env.encode().unwrap_or_else(|e| format!("<{e}>"));
            self.log(EventKind::CqiData, line.trim_end().to_string(), false);
        }
        match applied {
            Ok(()) => {
                if let Some(o) = self.observer.as_mut() {
                    o.world(&self.model);
                }
            }
            Err(e) => self.reply(format!("Robot report rejected: {e}."), true),
        }
    }

    /// Run one user utterance through the whole pipeline. Never panics on
    /// bad input; every failure becomes a reply.
    pub fn repl_turn(&mut self, text: &str) -> Vec<TranscriptEvent> {
        let start = self.transcript.len();
        self.log(EventKind::User, text.trim().to_string(), false);
        match self.understand(text) {
            Ok(n) => self.act(&n),
            Err((msg, error)) => self.reply(msg, error),
        }
        self.transcript[start..].to_vec()
    }

    fn understand(&mut self, text: &str) -> Result<NTuple, (String, bool)> {
        let no_parse = || (NO_PARSE_REPLY.to_string(), true);
        let tokens = tokenize(text).map_err(|_| no_parse())?;
        let candidates = analyze(&self.grammar, &tokens).map_err(|_| no_parse())?;
        let head = candidates.into_iter().next().ok_or_else(no_parse)?;
        if !head.is_full_span(tokens.len()) {
            return Err(no_parse());
        }
        self.log(EventKind::SemSpec, head.semspec.canonical_text(), false);
        let resolved = resolve_anaphora(&self.grammar, &head.semspec).map_err(|e| match e {
            AnalyzerError::UnresolvedPronoun { pronoun, .. } => {
                (format!("I do not know what \"{pronoun}\" refers to."), true)
            }
            _ => no_parse(),
        })?;
        let n = specialize(&self.grammar, &resolved).map_err(|_| ("I did not understand that.".to_string(), true))?;
        self.log(EventKind::NTuple, ntuple_to_canonical_text(&n), false);
        if let Some(o) = self.observer.as_mut() {
            o.ntuple(&n);
        }
        let robot = &self.model.robot.id;
        let p = &n.protagonist;
        let addressed_elsewhere = !p.is_empty()
            && p != robot
            && p != "robot"
            && self.grammar.is_ontology_type(p)
            && self.grammar.is_subtype(p, "robot");
        if addressed_elsewhere {
            return Err((format!("Sorry, I am {robot}, not {p}."), false));
        }
        Ok(n)
    }

    fn act(&mut self, n: &NTuple) {
        let outcome = handle_ntuple(n, &self.state, &self.model, &self.caps);
        let model_changed = outcome.model != self.model;
        self.model = outcome.model;
        self.state = outcome.state;
        if model_changed {
            if let Some(o) = self.observer.as_mut() {
                o.world(&self.model);
            }
        }
        for r in outcome.replies {
            self.reply(r, outcome.failed);
        }
        for cmd in outcome.commands {
            if let Err(msg) = self.execute(cmd) {
                self.reply(msg, true);
                break;
            }
        }
    }

    fn execute(&mut self, cmd: CqiCommand) -> Result<(), String> {
        self.seq += 1;
        let env = Envelope::command(cmd.clone(), self.seq, self.link.clock());
        let line = env.encode().map_err(|e| format!("I cannot send that command: {e}."))?;
        self.log(EventKind::CqiCmd, line.trim_end().to_string(), false);
        let mut received = Vec::new();
        let result = self.link.execute(&env, &mut |d| received.push(d));
        let last_pose = received
            .iter()
            .rposition(|e| matches!(e.payload, Payload::Data(CqiData::AtPose { .. })));
        let is_move = matches!(cmd, CqiCommand::MoveToPose { .. });
        for (i, d) in received.into_iter().enumerate() {
            self.receive(d, is_move && Some(i) == last_pose);
        }
        result.map_err(|e| format!("{e}."))?;
        let holding = self.model.robot.holding.clone();
        match cmd {
            CqiCommand::GraspObject { object_label } if holding.as_deref() != Some(object_label.as_str()) => {
                Err(format!("I could not grasp {object_label}."))
            }
            CqiCommand::Release {} if holding.is_some() => Err("I could not let go.".into()),
            _ => Ok(()),
        }
    }
}

/// Run a script of utterances, one per line (`#` starts a comment line),
/// against an in-process simulator. Returns the transcript and the exit
/// status: zero iff no event reported an error.
pub fn run_script(script: &str, grammar: Arc<Grammar>, model: SituationModel) -> (String, i32) {
    let mut session = Session::builtin(grammar, model, false);
    for line in script.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        session.repl_turn(line);
    }
    (render_transcript(session.transcript()), i32::from(session.has_errors()))
}
