//! Backend roles as trait objects.
//!
//! Every policy, world model and chunk classifier, whether an in-process mock
//! or a remote server reached over the wire protocol, sits behind one of the
//! traits below. Implementations are looked up by name in a
//! [`BackendRegistry`](crate::registry::BackendRegistry).

use thiserror::Error;

use crate::action::ActionChunk;
use crate::frame::Frame;
use crate::fusion::ChunkClass;
use crate::protocol::ProtocolError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// The backend answered with an ERROR message.
    #[error("backend error {code}: {message}")]
    Remote { code: String, message: String },
    #[error("backend timed out")]
    Timeout,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("{0}")]
    Config(String),
}

impl BackendError {
    pub fn remote(code: &str, message: impl Into<String>) -> Self {
        BackendError::Remote {
            code: code.to_owned(),
            message: message.into(),
        }
    }

    /// Short machine-readable code used when the error crosses the wire.
    pub fn code(&self) -> &str {
        match self {
            BackendError::Remote { code, .. } => code,
            BackendError::Timeout => "TIMEOUT",
            BackendError::Protocol(_) => "PROTOCOL",
            BackendError::Unavailable(_) => "UNAVAILABLE",
            BackendError::Config(_) => "CONFIG",
        }
    }
}

impl From<ProtocolError> for BackendError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Timeout => BackendError::Timeout,
            ProtocolError::Closed => BackendError::Unavailable("connection closed".into()),
            ProtocolError::Io(io) => BackendError::Unavailable(io.to_string()),
            other => BackendError::Protocol(other.to_string()),
        }
    }
}

pub trait PolicyBackend: Send {
    /// Clears per-episode state. Called before every rollout.
    fn reset(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    /// Next action chunk at the policy's native rate.
    fn predict_actions(
        &mut self,
        observation: &Frame,
        task_name: &str,
    ) -> Result<ActionChunk, BackendError>;
}

pub trait WorldModelBackend: Send {
    fn reset(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    /// One frame per action, conditioned on `state` only.
    fn predict_frames(
        &mut self,
        state: &Frame,
        actions: &ActionChunk,
        seed: u64,
    ) -> Result<Vec<Frame>, BackendError>;
}

pub trait ChunkClassifier: Send {
    fn reset(&mut self) -> Result<(), BackendError> {
        Ok(())
    }

    fn classify_chunk(
        &mut self,
        frames: &[Frame],
        task_name: &str,
    ) -> Result<ChunkClass, BackendError>;
}
