use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use crate::cqi::{decode_message, CodecError, CqiCommand, CqiData, Envelope, Payload, Simulator};
use crate::world::normalize_angle;

/// Tolerances at which a streamed pose counts as arrival.
const ARRIVAL_POSITION: f64 = 0.01;
const ARRIVAL_HEADING: f64 = 0.01;
/// Silence after which the robot's initial report is taken as complete.
const START_QUIET: Duration = Duration::from_millis(200);
/// Safety cap on simulated ticks for one move.
const MAX_MOVE_TICKS: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("robot connection failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("robot sent a bad message: {0}")]
    Codec(#[from] CodecError),
    #[error("robot closed the connection")]
    Closed,
    #[error("robot did not finish {0}")]
    Unfinished(String),
    #[error("robot halted")]
    Halted,
}

/// The solver's connection to a robot. Data messages are handed to `sink`
/// in arrival order; `execute` returns once the command has completed.
pub trait RobotLink: Send {
    /// Seconds on the robot's clock.
    fn clock(&self) -> f64;
    /// Receive the robot's initial report.
    fn start(&mut self, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError>;
    fn execute(&mut self, cmd: &Envelope, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError>;
}

/// An in-process simulator. Without `realtime`, simulated time advances as
/// fast as the host allows, which keeps runs deterministic.
pub struct BuiltinLink {
    sim: Simulator,
    seq: u64,
    realtime: bool,
    halt: Arc<AtomicBool>,
}

impl BuiltinLink {
    pub fn new(sim: Simulator, realtime: bool) -> Self {
        BuiltinLink {
            sim,
            seq: 0,
            realtime,
            halt: Arc::new(AtomicBool::new(false)),
        }
    }

    /// A flag that stops any running move when set.
    pub fn halt_flag(&self) -> Arc<AtomicBool> {
        self.halt.clone()
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    fn emit(&mut self, data: Vec<CqiData>, sink: &mut dyn FnMut(Envelope)) {
        for d in data {
            self.seq += 1;
            sink(Envelope::data(d, self.seq, self.sim.clock()));
        }
    }
}

impl RobotLink for BuiltinLink {
    fn clock(&self) -> f64 {
        self.sim.clock()
    }

    fn start(&mut self, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        let data = self.sim.start_data();
        self.emit(data, sink);
        Ok(())
    }

    fn execute(&mut self, cmd: &Envelope, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        let Payload::Command(c) = &cmd.payload else {
            return Ok(());
        };
        let data = self.sim.apply_command(c);
        self.emit(data, sink);
        let tick = Duration::from_secs_f64(self.sim.params().tick);
        for _ in 0..MAX_MOVE_TICKS {
            if self.sim.is_idle() {
                return Ok(());
            }
            if self.halt.load(Ordering::Relaxed) {
                return Err(LinkError::Halted);
            }
            if self.realtime {
                thread::sleep(tick);
            }
            let data = self.sim.step();
            self.emit(data, sink);
        }
        Err(LinkError::Unfinished(cmd.payload.msg().into()))
    }
}

/// A robot reached over newline-delimited JSON on TCP.
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
    /// Bytes of a line interrupted by a read timeout.
    partial: String,
    clock: f64,
}

impl TcpLink {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, LinkError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(TcpLink {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            timeout,
            partial: String::new(),
            clock: 0.0,
        })
    }

    fn read(&mut self) -> Result<Envelope, LinkError> {
        if self.reader.read_line(&mut self.partial)? == 0 {
            return Err(LinkError::Closed);
        }
        let line = std::mem::take(&mut self.partial);
        let env = decode_message(&line)?;
        self.clock = self.clock.max(env.stamp);
        Ok(env)
    }
}

fn arrived(goal: (f64, f64, f64), d: &CqiData) -> bool {
    match d {
        CqiData::AtPose { x, y, theta } => {
            (goal.0 - x).hypot(goal.1 - y) < ARRIVAL_POSITION
                && normalize_angle(goal.2 - theta).abs() < ARRIVAL_HEADING
        }
        _ => false,
    }
}

impl RobotLink for TcpLink {
    fn clock(&self) -> f64 {
        self.clock
    }

    fn start(&mut self, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        let (mut pose, mut holding) = (false, false);
        while !(pose && holding) {
            let env = self.read()?;
            match &env.payload {
                Payload::Data(CqiData::AtPose { .. }) => pose = true,
                Payload::Data(CqiData::Holding { .. }) => holding = true,
                _ => {}
            }
            sink(env);
        }
        // Property reports follow; take them until the robot goes quiet or
        // starts streaming its pose.
        self.writer.set_read_timeout(Some(START_QUIET))?;
        let drained = loop {
            match self.read() {
                Ok(env) => {
                    let tick = matches!(env.payload, Payload::Data(CqiData::AtPose { .. }));
                    sink(env);
                    if tick {
                        break Ok(());
                    }
                }
                Err(LinkError::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
                {
                    break Ok(())
                }
                Err(e) => break Err(e),
            }
        };
        self.writer.set_read_timeout(Some(self.timeout))?;
        drained
    }

    fn execute(&mut self, cmd: &Envelope, sink: &mut dyn FnMut(Envelope)) -> Result<(), LinkError> {
        let Payload::Command(c) = &cmd.payload else {
            return Ok(());
        };
        self.writer.write_all(cmd.encode()?.as_bytes())?;
        self.writer.flush()?;
        loop {
            let env = self.read()?;
            let done = match (c, &env.payload) {
                (CqiCommand::MoveToPose { x, y, theta }, Payload::Data(d)) => arrived((*x, *y, *theta), d),
                (_, Payload::Data(CqiData::Holding { .. })) => true,
                _ => false,
            };
            sink(env);
            if done {
                return Ok(());
            }
        }
    }
}
