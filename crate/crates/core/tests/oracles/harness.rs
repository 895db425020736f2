//! Scenario runs with a recording robot link, so tests can see every data
//! message and the simulator's own final world.

use std::sync::{Arc, Mutex};

use congra_core::cqi::{CqiCommand, CqiData, Envelope, Payload, SimParams, Simulator};
use congra_core::grammar::Grammar;
use congra_core::session::{render_transcript, BuiltinLink, LinkError, RobotLink, Session};
use congra_core::world::SituationModel;

#[derive(Default)]
pub struct Recording {
    pub data: Vec<CqiData>,
    pub commands: Vec<CqiCommand>,
}

struct RecordingLink {
    inner: Arc<Mutex<BuiltinLink>>,
    log: Arc<Mutex<Recording>>,
}

impl RecordingLink {
    fn tap<'a>(log: &'a Mutex<Recording>, sink: &'a mut dyn FnMut(Envelope)) -> impl FnMut(Envelope) + 'a {
        move |env: Envelope| {
            if let Payload::Data(d) = &env.payload {
                log.lock().unwrap().data.push(d.clone());
            }
            sink(env);
        }
    }
}

impl RobotLink for RecordingLink {
    fn clock(&self) -> f64 {
        self.inner.lock().unwrap().clock()
    }

    fn start(&mut self, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        let mut tap = Self::tap(&self.log, sink);
        self.inner.lock().unwrap().start(&mut tap)
    }

    fn execute(&mut self, cmd: &Envelope, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        if let Payload::Command(c) = &cmd.payload {
            self.log.lock().unwrap().commands.push(c.clone());
        }
        let mut tap = Self::tap(&self.log, sink);
        self.inner.lock().unwrap().execute(cmd, &mut tap)
    }
}

pub struct ScenarioRun {
    pub transcript: String,
    pub failed: bool,
    /// The solver's model after the last turn.
    pub model: SituationModel,
    /// The simulator's ground truth after the last turn.
    pub simulated: SituationModel,
    pub recording: Recording,
}

/// Drive a session turn by turn over the in-process simulator.
pub fn run_scenario(g: &Arc<Grammar>, world: &SituationModel, lines: &[&str]) -> ScenarioRun {
    let sim = Simulator::new(world.clone(), SimParams::default());
    let inner = Arc::new(Mutex::new(BuiltinLink::new(sim, false)));
    let log = Arc::new(Mutex::new(Recording::default()));
    let link = RecordingLink {
        inner: inner.clone(),
        log: log.clone(),
    };
    let mut session = Session::new(g.clone(), world.clone(), Box::new(link), None).expect("builtin link starts");
    for line in lines {
        session.repl_turn(line);
    }
    let simulated = inner.lock().unwrap().simulator().world().clone();
    let recording = std::mem::take(&mut *log.lock().unwrap());
    ScenarioRun {
        transcript: render_transcript(session.transcript()),
        failed: session.has_errors(),
        model: session.model().clone(),
        simulated,
        recording,
    }
}

/// Apply recorded data, in order, to a copy of the starting world.
pub fn replay(start: &SituationModel, data: &[CqiData]) -> SituationModel {
    let mut m = start.clone();
    for d in data {
        m.apply_data(d).expect("recorded data applies");
    }
    m
}

/// Utterances of a script file, skipping comments and blank lines.
pub fn script_lines(text: &str) -> Vec<&str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// The world named by a script's `# world: NAME` header.
pub fn script_world(text: &str) -> &str {
    text.lines()
        .find_map(|l| l.strip_prefix("# world:"))
        .map(str::trim)
        .expect("script names its world")
}
