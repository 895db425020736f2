use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use tracing::{debug, warn};

use super::{decode_message, CqiCommand, Envelope, Payload, Simulator};

/// Play the robot side of one connection: read command lines, run the
/// simulator, write data lines. With `realtime` the tick loop follows the
/// wall clock and publishes the pose continuously; otherwise it runs as
/// fast as possible and stays silent while idle.
pub fn serve_robot(stream: TcpStream, mut sim: Simulator, realtime: bool) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    let (tx, rx) = mpsc::channel::<CqiCommand>();
    let reader = BufReader::new(stream);
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            match decode_message(&line) {
                Ok(Envelope {
                    payload: Payload::Command(c),
                    ..
                }) => {
                    if tx.send(c).is_err() {
                        break;
                    }
                }
                Ok(other) => warn!(msg = other.payload.msg(), "ignoring data sent to the robot"),
                Err(e) => warn!(error = %e, "ignoring malformed command line"),
            }
        }
    });
    let mut seq = 0u64;
    let mut send = |sim: &Simulator, data: Vec<super::CqiData>| -> io::Result<()> {
        for d in data {
            seq += 1;
            let line = Envelope::data(d, seq, sim.clock())
                .encode()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            out.write_all(line.as_bytes())?;
        }
        out.flush()
    };
    send(&sim, sim.start_data())?;
    let tick = Duration::from_secs_f64(sim.params().tick);
    let mut next_tick = Instant::now() + tick;
    loop {
        if sim.is_idle() {
            let cmd = if realtime {
                match rx.recv_timeout(next_tick.saturating_duration_since(Instant::now())) {
                    Ok(c) => Some(c),
                    Err(mpsc::RecvTimeoutError::Timeout) => None,
                    Err(mpsc::RecvTimeoutError::Disconnected) => return Ok(()),
                }
            } else {
                match rx.recv() {
                    Ok(c) => Some(c),
                    Err(_) => return Ok(()),
                }
            };
            if let Some(cmd) = cmd {
                debug!(?cmd, "robot command");
                let data = sim.apply_command(&cmd);
                send(&sim, data)?;
                continue;
            }
        }
        if realtime {
            thread::sleep(next_tick.saturating_duration_since(Instant::now()));
            next_tick += tick;
        }
        let data = sim.step();
        send(&sim, data)?;
    }
}
