//! Command and Query Interface: the messages exchanged between the problem
//! solver and a robot, their line-oriented JSON wire form, and a kinematic
//! simulator that plays the robot side.

mod server;
mod sim;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use server::serve_robot;
pub use sim::{SimParams, Simulator};

pub const COMMAND_TOPIC: &str = "/cqi/command/";
pub const DATA_TOPIC: &str = "/cqi/data/";

/// Literal label meaning "nothing is held".
pub const NONE_LABEL: &str = "none";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg", content = "args", rename_all = "snake_case")]
pub enum CqiCommand {
    MoveToPose { x: f64, y: f64, theta: f64 },
    GraspObject { object_label: String },
    Release {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "msg", content = "args", rename_all = "snake_case")]
pub enum CqiData {
    AtPose { x: f64, y: f64, theta: f64 },
    Holding { object: String },
    HasProperty { object: String, property: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Command(CqiCommand),
    Data(CqiData),
}

impl Payload {
    pub fn msg(&self) -> &'static str {
        match self {
            Payload::Command(CqiCommand::MoveToPose { .. }) => "move_to_pose",
            Payload::Command(CqiCommand::GraspObject { .. }) => "grasp_object",
            Payload::Command(CqiCommand::Release {}) => "release",
            Payload::Data(CqiData::AtPose { .. }) => "at_pose",
            Payload::Data(CqiData::Holding { .. }) => "holding",
            Payload::Data(CqiData::HasProperty { .. }) => "has_property",
        }
    }

    fn topic(&self) -> &'static str {
        match self {
            Payload::Command(_) => COMMAND_TOPIC,
            Payload::Data(_) => DATA_TOPIC,
        }
    }
}

impl From<CqiCommand> for Payload {
    fn from(c: CqiCommand) -> Self {
        Payload::Command(c)
    }
}

impl From<CqiData> for Payload {
    fn from(d: CqiData) -> Self {
        Payload::Data(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub payload: Payload,
    pub seq: u64,
    /// Seconds since session start.
    pub stamp: f64,
}

impl Envelope {
    pub fn command(cmd: CqiCommand, seq: u64, stamp: f64) -> Self {
        Envelope {
            topic: COMMAND_TOPIC.into(),
            payload: cmd.into(),
            seq,
            stamp,
        }
    }

    pub fn data(d: CqiData, seq: u64, stamp: f64) -> Self {
        Envelope {
            topic: DATA_TOPIC.into(),
            payload: d.into(),
            seq,
            stamp,
        }
    }

    pub fn encode(&self) -> Result<String, CodecError> {
        encode_message(&self.topic, &self.payload, self.seq, self.stamp)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("malformed message at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unknown message {0:?}")]
    UnknownMessage(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("{msg} cannot be sent on {topic}")]
    TopicMismatch { topic: String, msg: String },
    #[error("field {0:?} must be a finite number")]
    NonFinite(String),
    #[error("grasp_object needs a non-empty object label")]
    EmptyLabel,
}

#[derive(Serialize)]
struct Wire<'a> {
    topic: &'a str,
    #[serde(flatten)]
    payload: &'a Payload,
    seq: u64,
    stamp: f64,
}

fn check_payload(p: &Payload) -> Result<(), CodecError> {
    let finite = |name: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(CodecError::NonFinite(name.to_string()))
        }
    };
    match p {
        Payload::Command(CqiCommand::MoveToPose { x, y, theta }) | Payload::Data(CqiData::AtPose { x, y, theta }) => {
            finite("x", *x)?;
            finite("y", *y)?;
            finite("theta", *theta)
        }
        Payload::Command(CqiCommand::GraspObject { object_label }) if object_label.is_empty() => {
            Err(CodecError::EmptyLabel)
        }
        _ => Ok(()),
    }
}

/// One LF-terminated wire line.
pub fn encode_message(topic: &str, payload: &Payload, seq: u64, stamp: f64) -> Result<String, CodecError> {
    if topic != COMMAND_TOPIC && topic != DATA_TOPIC {
        return Err(CodecError::UnknownTopic(topic.to_string()));
    }
    if payload.topic() != topic {
        return Err(CodecError::TopicMismatch {
            topic: topic.to_string(),
            msg: payload.msg().to_string(),
        });
    }
    check_payload(payload)?;
    if !stamp.is_finite() {
        return Err(CodecError::NonFinite("stamp".into()));
    }
    let mut line = serde_json::to_string(&Wire {
        topic,
        payload,
        seq,
        stamp,
    })
    .expect("wire messages always serialize");
    line.push('\n');
    Ok(line)
}

fn field<'a>(m: &'a Map<String, Value>, name: &str) -> Result<&'a Value, CodecError> {
    m.get(name).ok_or_else(|| CodecError::MissingField(name.to_string()))
}

fn number(m: &Map<String, Value>, name: &str) -> Result<f64, CodecError> {
    field(m, name)?
        .as_f64()
        .ok_or_else(|| CodecError::Malformed {
            offset: 0,
            message: format!("{name} is not a number"),
        })
}

fn text(m: &Map<String, Value>, name: &str) -> Result<String, CodecError> {
    field(m, name)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| CodecError::Malformed {
            offset: 0,
            message: format!("{name} is not a string"),
        })
}

/// Parse one wire line. Unknown extra fields are ignored.
pub fn decode_message(line: &str) -> Result<Envelope, CodecError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let value: Value = serde_json::from_str(line).map_err(|e| CodecError::Malformed {
        offset: byte_offset(line, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(top) = value else {
        return Err(CodecError::Malformed {
            offset: 0,
            message: "expected a JSON object".into(),
        });
    };
    let topic = text(&top, "topic")?;
    let msg = text(&top, "msg")?;
    let seq = field(&top, "seq")?.as_u64().ok_or_else(|| CodecError::Malformed {
        offset: 0,
        message: "seq is not an unsigned integer".into(),
    })?;
    let stamp = number(&top, "stamp")?;
    let empty = Map::new();
    let args = match top.get("args") {
        Some(Value::Object(a)) => a,
        Some(_) => {
            return Err(CodecError::Malformed {
                offset: 0,
                message: "args is not an object".into(),
            })
        }
        None if msg == "release" => &empty,
        None => return Err(CodecError::MissingField("args".into())),
    };
    let payload: Payload = match msg.as_str() {
        "move_to_pose" => CqiCommand::MoveToPose {
            x: number(args, "x")?,
            y: number(args, "y")?,
            theta: number(args, "theta")?,
        }
        .into(),
        "grasp_object" => CqiCommand::GraspObject {
            object_label: text(args, "object_label")?,
        }
        .into(),
        "release" => CqiCommand::Release {}.into(),
        "at_pose" => CqiData::AtPose {
            x: number(args, "x")?,
            y: number(args, "y")?,
            theta: number(args, "theta")?,
        }
        .into(),
        "holding" => CqiData::Holding {
            object: text(args, "object")?,
        }
        .into(),
        "has_property" => CqiData::HasProperty {
            object: text(args, "object")?,
            property: text(args, "property")?,
            value: text(args, "value")?,
        }
        .into(),
        other => return Err(CodecError::UnknownMessage(other.to_string())),
    };
    if topic != COMMAND_TOPIC && topic != DATA_TOPIC {
        return Err(CodecError::UnknownTopic(topic));
    }
    if payload.topic() != topic {
        return Err(CodecError::TopicMismatch { topic, msg });
    }
    check_payload(&payload)?;
    Ok(Envelope {
        topic,
        payload,
        seq,
        stamp,
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}
