//! Framed wire protocol spoken between the orchestrator and its policy,
//! world-model and classifier backends.
//!
//! One logical session per connection. Requests are strictly serial: the
//! client sends one request and waits for its response.

mod client;
mod envelope;
mod messages;
mod server;

use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use client::check_generated;
pub use client::RemoteSession;
pub use envelope::{
    decode_envelope, decode_envelope_with, encode_envelope, encode_envelope_with, read_envelope,
    write_envelope, Envelope, StreamDecoder,
};
pub use messages::{ErrorBody, Hello, HelloAck, Message};
pub use server::{
    serve_connection, serve_listener, ClassifierFactory, PolicyFactory, ServedBackend,
    WorldModelFactory,
};

pub const PROTOCOL_VERSION: u32 = 1;

/// Protocol constants, kept in one place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolLimits {
    pub max_header_bytes: usize,
    pub max_payload_bytes: u64,
    pub request_timeout: Duration,
}

impl Default for ProtocolLimits {
    fn default() -> Self {
        Self {
            max_header_bytes: 16 * 1024 * 1024,
            max_payload_bytes: 4 * 1024 * 1024 * 1024,
            request_timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("incomplete message: need {needed} bytes, have {available}")]
    Incomplete { needed: usize, available: usize },
    #[error("header of {len} bytes exceeds limit of {max}")]
    HeaderTooLarge { len: u64, max: u64 },
    #[error("payload of {len} bytes exceeds limit of {max}")]
    PayloadTooLarge { len: u64, max: u64 },
    #[error("payload length {actual} does not match declared frame bytes {declared}")]
    PayloadMismatch { declared: u64, actual: u64 },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("unexpected message: expected {expected}, got {got}")]
    Unexpected { expected: String, got: String },
    #[error("timed out waiting for backend")]
    Timeout,
    #[error("connection closed")]
    Closed,
    #[error("i/o error: {0}")]
    Io(std::io::Error),
}

impl ProtocolError {
    /// Whether the connection can no longer be trusted to sit on a message boundary.
    pub fn closes_connection(&self) -> bool {
        !matches!(self, ProtocolError::Encoding(_))
    }
}

impl From<std::io::Error> for ProtocolError {
    fn from(e: std::io::Error) -> Self {
        use std::io::ErrorKind;
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => ProtocolError::Timeout,
            ErrorKind::UnexpectedEof
            | ErrorKind::ConnectionReset
            | ErrorKind::ConnectionAborted
            | ErrorKind::BrokenPipe => ProtocolError::Closed,
            _ => ProtocolError::Io(e),
        }
    }
}

macro_rules! message_types {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum MessageType { $($variant),* }

        impl MessageType {
            pub const ALL: &'static [MessageType] = &[$(MessageType::$variant),*];

            pub fn as_str(&self) -> &'static str {
                match self { $(MessageType::$variant => $name),* }
            }
        }

        impl FromStr for MessageType {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $($name => Ok(MessageType::$variant),)* _ => Err(()) }
            }
        }
    };
}

message_types! {
    Hello => "HELLO",
    HelloAck => "HELLO_ACK",
    PredictActions => "PREDICT_ACTIONS",
    Actions => "ACTIONS",
    PredictFrames => "PREDICT_FRAMES",
    Frames => "FRAMES",
    ClassifyChunk => "CLASSIFY_CHUNK",
    ChunkLabel => "CHUNK_LABEL",
    Reset => "RESET",
    ResetAck => "RESET_ACK",
    Error => "ERROR",
}

impl std::fmt::Display for MessageType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Policy,
    WorldModel,
    Classifier,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Policy => "POLICY",
            Role::WorldModel => "WORLD_MODEL",
            Role::Classifier => "CLASSIFIER",
        }
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "policy" => Ok(Role::Policy),
            "world-model" => Ok(Role::WorldModel),
            "classifier" => Ok(Role::Classifier),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
