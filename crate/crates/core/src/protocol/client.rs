use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};

use super::{read_envelope, write_envelope, Hello, Message, ProtocolError, ProtocolLimits, Role};
use crate::action::ActionChunk;
use crate::backend::{BackendError, ChunkClassifier, PolicyBackend, WorldModelBackend};
use crate::frame::Frame;
use crate::fusion::ChunkClass;

/// Client side of one backend session over a TCP connection.
pub struct RemoteSession {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    session_id: String,
    role: Role,
    limits: ProtocolLimits,
    broken: bool,
}

impl std::fmt::Debug for RemoteSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteSession")
            .field("session_id", &self.session_id)
            .field("role", &self.role)
            .finish()
    }
}

impl RemoteSession {
    /// Connects and performs the HELLO handshake for `hello.role`.
    pub fn connect(
        addr: impl ToSocketAddrs,
        hello: &Hello,
        limits: ProtocolLimits,
    ) -> Result<Self, BackendError> {
        let addrs: Vec<_> = addr
            .to_socket_addrs()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?
            .collect();
        let stream = addrs
            .iter()
            .find_map(|a| TcpStream::connect_timeout(a, limits.request_timeout).ok())
            .ok_or_else(|| BackendError::Unavailable(format!("cannot connect to {addrs:?}")))?;
        stream
            .set_read_timeout(Some(limits.request_timeout))
            .and_then(|_| stream.set_write_timeout(Some(limits.request_timeout)))
            .and_then(|_| stream.set_nodelay(true))
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let writer = stream
            .try_clone()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let mut session = Self {
            reader: BufReader::new(stream),
            writer,
            session_id: String::new(),
            role: hello.role,
            limits,
            broken: false,
        };
        let ack_env = session.round_trip_env(&Message::Hello(hello.clone()))?;
        match Message::from_envelope(&ack_env).map_err(BackendError::from)? {
            Message::HelloAck(ack) if ack.role == hello.role => {
                session.session_id = ack_env.session_id;
                Ok(session)
            }
            Message::HelloAck(ack) => Err(BackendError::Protocol(format!(
                "asked for {} but backend is {}",
                hello.role, ack.role
            ))),
            Message::Error(e) => Err(BackendError::Remote {
                code: e.code,
                message: e.message,
            }),
            other => Err(BackendError::Protocol(format!(
                "expected HELLO_ACK, got {}",
                other.message_type()
            ))),
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    fn round_trip_env(&mut self, msg: &Message) -> Result<super::Envelope, BackendError> {
        if self.broken {
            return Err(BackendError::Unavailable("session is closed".into()));
        }
        let result = (|| {
            write_envelope(
                &mut self.writer,
                &msg.to_envelope(&self.session_id),
                &self.limits,
            )?;
            read_envelope(&mut self.reader, &self.limits)
        })();
        match result {
            Ok(env) => {
                if !self.session_id.is_empty() && env.session_id != self.session_id {
                    self.broken = true;
                    return Err(BackendError::Protocol(format!(
                        "session id changed from {} to {}",
                        self.session_id, env.session_id
                    )));
                }
                Ok(env)
            }
            Err(e) => {
                if e.closes_connection() {
                    self.broken = true;
                    let _ = self.writer.shutdown(std::net::Shutdown::Both);
                }
                Err(e.into())
            }
        }
    }

    fn request(&mut self, msg: &Message) -> Result<Message, BackendError> {
        let env = self.round_trip_env(msg)?;
        let reply = Message::from_envelope(&env).map_err(|e| {
            self.broken = true;
            BackendError::from(e)
        })?;
        if let Message::Error(e) = reply {
            return Err(BackendError::Remote {
                code: e.code,
                message: e.message,
            });
        }
        Ok(reply)
    }

    fn require_role(&self, role: Role) -> Result<(), BackendError> {
        if self.role != role {
            return Err(BackendError::Config(format!(
                "session role is {}, request needs {role}",
                self.role
            )));
        }
        Ok(())
    }

    pub fn reset_session(&mut self) -> Result<(), BackendError> {
        match self.request(&Message::Reset)? {
            Message::ResetAck => Ok(()),
            other => Err(unexpected("RESET_ACK", &other)),
        }
    }

    pub fn request_actions(
        &mut self,
        observation: &Frame,
        task_name: &str,
    ) -> Result<ActionChunk, BackendError> {
        self.require_role(Role::Policy)?;
        match self.request(&Message::PredictActions {
            task_name: task_name.to_owned(),
            observation: observation.clone(),
        })? {
            Message::Actions(chunk) => Ok(chunk),
            other => Err(unexpected("ACTIONS", &other)),
        }
    }

    pub fn request_frames(
        &mut self,
        state: &Frame,
        actions: &ActionChunk,
        seed: u64,
    ) -> Result<Vec<Frame>, BackendError> {
        self.require_role(Role::WorldModel)?;
        match self.request(&Message::PredictFrames {
            state: state.clone(),
            actions: actions.clone(),
            seed,
        })? {
            Message::Frames(frames) => {
                check_generated(state, actions.len(), &frames)?;
                Ok(frames)
            }
            other => Err(unexpected("FRAMES", &other)),
        }
    }

    pub fn request_chunk_label(
        &mut self,
        chunk: &[Frame],
        task_name: &str,
    ) -> Result<ChunkClass, BackendError> {
        self.require_role(Role::Classifier)?;
        match self.request(&Message::ClassifyChunk {
            task_name: task_name.to_owned(),
            frames: chunk.to_vec(),
        })? {
            Message::ChunkLabel(label) => Ok(label),
            other => Err(unexpected("CHUNK_LABEL", &other)),
        }
    }
}

fn unexpected(expected: &str, got: &Message) -> BackendError {
    BackendError::Protocol(
        ProtocolError::Unexpected {
            expected: expected.to_owned(),
            got: got.message_type().to_string(),
        }
        .to_string(),
    )
}

/// World-model output must be one frame per action, all the size of `state`.
pub(crate) fn check_generated(
    state: &Frame,
    expected: usize,
    frames: &[Frame],
) -> Result<(), BackendError> {
    if frames.len() != expected {
        return Err(BackendError::Protocol(format!(
            "world model returned {} frames, expected {expected}",
            frames.len()
        )));
    }
    if let Some((i, f)) = frames
        .iter()
        .enumerate()
        .find(|(_, f)| f.dims() != state.dims())
    {
        return Err(BackendError::Protocol(format!(
            "generated frame {i} is {}x{}, state is {}x{}",
            f.width(),
            f.height(),
            state.width(),
            state.height()
        )));
    }
    Ok(())
}

impl PolicyBackend for RemoteSession {
    fn reset(&mut self) -> Result<(), BackendError> {
        self.reset_session()
    }

    fn predict_actions(
        &mut self,
        observation: &Frame,
        task_name: &str,
    ) -> Result<ActionChunk, BackendError> {
        self.request_actions(observation, task_name)
    }
}

impl WorldModelBackend for RemoteSession {
    fn reset(&mut self) -> Result<(), BackendError> {
        self.reset_session()
    }

    fn predict_frames(
        &mut self,
        state: &Frame,
        actions: &ActionChunk,
        seed: u64,
    ) -> Result<Vec<Frame>, BackendError> {
        self.request_frames(state, actions, seed)
    }
}

impl ChunkClassifier for RemoteSession {
    fn reset(&mut self) -> Result<(), BackendError> {
        self.reset_session()
    }

    fn classify_chunk(
        &mut self,
        frames: &[Frame],
        task_name: &str,
    ) -> Result<ChunkClass, BackendError> {
        self.request_chunk_label(frames, task_name)
    }
}
