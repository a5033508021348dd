//! Typed messages carried inside envelopes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Envelope, MessageType, ProtocolError, Role, PROTOCOL_VERSION};
use crate::action::ActionChunk;
use crate::frame::Frame;
use crate::fusion::ChunkClass;

/// Session opener sent by the orchestrator, naming the role it expects the
/// backend to play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub role: Role,
    pub protocol_version: u32,
    pub task_names: Vec<String>,
    pub arm_count: u32,
    pub frame_width: u32,
    pub frame_height: u32,
    /// Reserved for additional camera views; no semantics yet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<String>>,
}

impl Hello {
    pub fn new(role: Role, task_names: Vec<String>, frame_width: u32, frame_height: u32) -> Self {
        Self {
            role,
            protocol_version: PROTOCOL_VERSION,
            task_names,
            arm_count: 1,
            frame_width,
            frame_height,
            views: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloAck {
    pub role: Role,
    pub protocol_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(Hello),
    HelloAck(HelloAck),
    PredictActions {
        task_name: String,
        observation: Frame,
    },
    Actions(ActionChunk),
    PredictFrames {
        state: Frame,
        actions: ActionChunk,
        seed: u64,
    },
    Frames(Vec<Frame>),
    ClassifyChunk {
        task_name: String,
        frames: Vec<Frame>,
    },
    ChunkLabel(ChunkClass),
    Reset,
    ResetAck,
    Error(ErrorBody),
}

fn to_fields<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v).expect("message bodies serialize") {
        Value::Object(m) => m,
        _ => unreachable!("message bodies are structs"),
    }
}

fn from_fields<T: DeserializeOwned>(env: &Envelope) -> Result<T, ProtocolError> {
    serde_json::from_value(Value::Object(env.fields.clone()))
        .map_err(|e| ProtocolError::Malformed(format!("bad {} fields: {e}", env.message_type)))
}

fn field<T: DeserializeOwned>(env: &Envelope, key: &str) -> Result<T, ProtocolError> {
    let v = env.fields.get(key).cloned().ok_or_else(|| {
        ProtocolError::Malformed(format!("{} is missing `{key}`", env.message_type))
    })?;
    serde_json::from_value(v)
        .map_err(|e| ProtocolError::Malformed(format!("{}.{key}: {e}", env.message_type)))
}

fn single_frame(env: &Envelope) -> Result<Frame, ProtocolError> {
    let mut frames = env.frames()?;
    if frames.len() != 1 {
        return Err(ProtocolError::Malformed(format!(
            "{} carries {} frames, expected 1",
            env.message_type,
            frames.len()
        )));
    }
    Ok(frames.pop().unwrap())
}

impl Message {
    pub fn message_type(&self) -> MessageType {
        match self {
            Message::Hello(_) => MessageType::Hello,
            Message::HelloAck(_) => MessageType::HelloAck,
            Message::PredictActions { .. } => MessageType::PredictActions,
            Message::Actions(_) => MessageType::Actions,
            Message::PredictFrames { .. } => MessageType::PredictFrames,
            Message::Frames(_) => MessageType::Frames,
            Message::ClassifyChunk { .. } => MessageType::ClassifyChunk,
            Message::ChunkLabel(_) => MessageType::ChunkLabel,
            Message::Reset => MessageType::Reset,
            Message::ResetAck => MessageType::ResetAck,
            Message::Error(_) => MessageType::Error,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error(ErrorBody {
            code: code.to_owned(),
            message: message.into(),
        })
    }

    pub fn to_envelope(&self, session_id: &str) -> Envelope {
        let env = Envelope::new(self.message_type(), session_id);
        match self {
            Message::Hello(h) => Envelope {
                fields: to_fields(h),
                ..env
            },
            Message::HelloAck(a) => Envelope {
                fields: to_fields(a),
                ..env
            },
            Message::PredictActions {
                task_name,
                observation,
            } => env
                .with_field("task_name", task_name.as_str())
                .with_frames([observation]),
            Message::Actions(chunk) => Envelope {
                fields: to_fields(chunk),
                ..env
            },
            Message::PredictFrames {
                state,
                actions,
                seed,
            } => env
                .with_field("seed", *seed)
                .with_field("actions", serde_json::to_value(actions).unwrap())
                .with_frames([state]),
            Message::Frames(frames) => env.with_frames(frames),
            Message::ClassifyChunk { task_name, frames } => env
                .with_field("task_name", task_name.as_str())
                .with_frames(frames),
            Message::ChunkLabel(label) => {
                env.with_field("label", serde_json::to_value(label).unwrap())
            }
            Message::Reset | Message::ResetAck => env,
            Message::Error(body) => Envelope {
                fields: to_fields(body),
                ..env
            },
        }
    }

    pub fn from_envelope(env: &Envelope) -> Result<Self, ProtocolError> {
        Ok(match env.message_type {
            MessageType::Hello => Message::Hello(from_fields(env)?),
            MessageType::HelloAck => Message::HelloAck(from_fields(env)?),
            MessageType::PredictActions => Message::PredictActions {
                task_name: field(env, "task_name")?,
                observation: single_frame(env)?,
            },
            MessageType::Actions => {
                let chunk: ActionChunk = from_fields(env)?;
                chunk
                    .validate()
                    .map_err(|e| ProtocolError::Malformed(format!("ACTIONS: {e}")))?;
                Message::Actions(chunk)
            }
            MessageType::PredictFrames => {
                let actions: ActionChunk = field(env, "actions")?;
                actions
                    .validate()
                    .map_err(|e| ProtocolError::Malformed(format!("PREDICT_FRAMES: {e}")))?;
                Message::PredictFrames {
                    state: single_frame(env)?,
                    actions,
                    seed: field(env, "seed")?,
                }
            }
            MessageType::Frames => Message::Frames(env.frames()?),
            MessageType::ClassifyChunk => Message::ClassifyChunk {
                task_name: field(env, "task_name")?,
                frames: env.frames()?,
            },
            MessageType::ChunkLabel => Message::ChunkLabel(field(env, "label")?),
            MessageType::Reset => Message::Reset,
            MessageType::ResetAck => Message::ResetAck,
            MessageType::Error => Message::Error(from_fields(env)?),
        })
    }
}
