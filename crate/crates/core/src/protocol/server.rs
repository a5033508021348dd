use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::{
    read_envelope, write_envelope, HelloAck, Message, ProtocolError, ProtocolLimits, Role,
    PROTOCOL_VERSION,
};
use crate::backend::{BackendError, ChunkClassifier, PolicyBackend, WorldModelBackend};

pub type PolicyFactory =
    Arc<dyn Fn(&super::Hello) -> Result<Box<dyn PolicyBackend>, BackendError> + Send + Sync>;
pub type WorldModelFactory =
    Arc<dyn Fn(&super::Hello) -> Result<Box<dyn WorldModelBackend>, BackendError> + Send + Sync>;
pub type ClassifierFactory =
    Arc<dyn Fn(&super::Hello) -> Result<Box<dyn ChunkClassifier>, BackendError> + Send + Sync>;

/// What a server process offers: one role, instantiated fresh per session.
#[derive(Clone)]
pub enum ServedBackend {
    Policy(PolicyFactory),
    WorldModel(WorldModelFactory),
    Classifier(ClassifierFactory),
}

impl ServedBackend {
    pub fn role(&self) -> Role {
        match self {
            ServedBackend::Policy(_) => Role::Policy,
            ServedBackend::WorldModel(_) => Role::WorldModel,
            ServedBackend::Classifier(_) => Role::Classifier,
        }
    }
}

enum Live {
    Policy(Box<dyn PolicyBackend>),
    WorldModel(Box<dyn WorldModelBackend>),
    Classifier(Box<dyn ChunkClassifier>),
}

fn error_message(e: &BackendError) -> Message {
    Message::error(e.code(), e.to_string())
}

fn handle(live: &mut Live, msg: Message) -> Message {
    let result = match (live, msg) {
        (Live::Policy(p), Message::Reset) => p.reset().map(|_| Message::ResetAck),
        (Live::WorldModel(w), Message::Reset) => w.reset().map(|_| Message::ResetAck),
        (Live::Classifier(c), Message::Reset) => c.reset().map(|_| Message::ResetAck),
        (
            Live::Policy(p),
            Message::PredictActions {
                task_name,
                observation,
            },
        ) => p
            .predict_actions(&observation, &task_name)
            .map(Message::Actions),
        (
            Live::WorldModel(w),
            Message::PredictFrames {
                state,
                actions,
                seed,
            },
        ) => w
            .predict_frames(&state, &actions, seed)
            .map(Message::Frames),
        (Live::Classifier(c), Message::ClassifyChunk { task_name, frames }) => c
            .classify_chunk(&frames, &task_name)
            .map(Message::ChunkLabel),
        (_, other) => Err(BackendError::remote(
            "UNSUPPORTED",
            format!("{} is not valid for this backend", other.message_type()),
        )),
    };
    result.unwrap_or_else(|e| error_message(&e))
}

/// Serves one session on `stream` until the peer disconnects or sends a
/// malformed message. Backend failures become ERROR replies and the session
/// continues.
pub fn serve_connection(
    stream: TcpStream,
    backend: &ServedBackend,
    session_id: &str,
    limits: &ProtocolLimits,
) -> Result<(), ProtocolError> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);

    let hello_env = read_envelope(&mut reader, limits)?;
    let hello = match Message::from_envelope(&hello_env)? {
        Message::Hello(h) => h,
        other => {
            let reply = Message::error(
                "HELLO_REQUIRED",
                format!("first message must be HELLO, got {}", other.message_type()),
            );
            write_envelope(&mut writer, &reply.to_envelope(""), limits)?;
            return Ok(());
        }
    };
    let reject = |code: &str, text: String, writer: &mut TcpStream| {
        write_envelope(writer, &Message::error(code, text).to_envelope(""), limits)
    };
    if hello.protocol_version != PROTOCOL_VERSION {
        return reject(
            "VERSION",
            format!("unsupported protocol version {}", hello.protocol_version),
            &mut writer,
        );
    }
    if hello.role != backend.role() {
        return reject(
            "ROLE_MISMATCH",
            format!("this backend serves {}, not {}", backend.role(), hello.role),
            &mut writer,
        );
    }
    let built = match backend {
        ServedBackend::Policy(f) => f(&hello).map(Live::Policy),
        ServedBackend::WorldModel(f) => f(&hello).map(Live::WorldModel),
        ServedBackend::Classifier(f) => f(&hello).map(Live::Classifier),
    };
    let mut live = match built {
        Ok(live) => live,
        Err(e) => return reject(e.code(), e.to_string(), &mut writer),
    };
    let ack = Message::HelloAck(HelloAck {
        role: backend.role(),
        protocol_version: PROTOCOL_VERSION,
    });
    write_envelope(&mut writer, &ack.to_envelope(session_id), limits)?;

    loop {
        let env = match read_envelope(&mut reader, limits) {
            Ok(env) => env,
            Err(ProtocolError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        };
        let reply = if env.session_id != session_id {
            Message::error("SESSION", format!("unknown session `{}`", env.session_id))
        } else {
            match Message::from_envelope(&env) {
                Ok(msg) => handle(&mut live, msg),
                // Framing was intact, only the body was wrong: answer and keep going.
                Err(e) => Message::error("BAD_REQUEST", e.to_string()),
            }
        };
        write_envelope(&mut writer, &reply.to_envelope(session_id), limits)?;
    }
}

/// Accepts connections forever, one thread per session.
pub fn serve_listener(
    listener: TcpListener,
    backend: ServedBackend,
    limits: ProtocolLimits,
) -> std::io::Result<()> {
    let counter = Arc::new(AtomicU64::new(0));
    for stream in listener.incoming() {
        let stream = stream?;
        let backend = backend.clone();
        let n = counter.fetch_add(1, Ordering::Relaxed);
        std::thread::spawn(move || {
            let _ = serve_connection(stream, &backend, &format!("s{n}"), &limits);
        });
    }
    Ok(())
}
