//! Envelope framing.
//!
//! ```text
//! [u32 BE header_len][header: UTF-8 JSON][u64 BE payload_len][payload]
//! ```
//!
//! The header is a JSON object with the reserved keys `type`, `session_id`
//! and `payload_frames` (a list of `[width, height]` pairs) plus any
//! message-specific fields. The payload is the concatenation of the declared
//! RGB8 frames, so `payload_len == sum(width * height * 3)` always holds.

use std::io::{Read, Write};

use serde_json::{Map, Value};

use super::{MessageType, ProtocolError, ProtocolLimits};
use crate::frame::{byte_len, Frame};

const RESERVED_KEYS: [&str; 3] = ["type", "session_id", "payload_frames"];

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub message_type: MessageType,
    pub session_id: String,
    /// Message-specific header fields (reserved keys excluded).
    pub fields: Map<String, Value>,
    /// Declared `(width, height)` of each frame in the payload.
    pub payload_frames: Vec<(u32, u32)>,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(message_type: MessageType, session_id: impl Into<String>) -> Self {
        Self {
            message_type,
            session_id: session_id.into(),
            fields: Map::new(),
            payload_frames: Vec::new(),
            payload: Vec::new(),
        }
    }

    pub fn with_field(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.fields.insert(key.to_owned(), value.into());
        self
    }

    pub fn with_frames<'a>(mut self, frames: impl IntoIterator<Item = &'a Frame>) -> Self {
        for f in frames {
            self.payload_frames.push(f.dims());
            self.payload.extend_from_slice(f.data());
        }
        self
    }

    /// Splits the payload back into frames using the declared sizes.
    pub fn frames(&self) -> Result<Vec<Frame>, ProtocolError> {
        check_payload(&self.payload_frames, self.payload.len() as u64)?;
        let mut out = Vec::with_capacity(self.payload_frames.len());
        let mut offset = 0;
        for &(w, h) in &self.payload_frames {
            let n = byte_len(w, h);
            let frame = Frame::new(w, h, self.payload[offset..offset + n].to_vec())
                .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
            out.push(frame);
            offset += n;
        }
        Ok(out)
    }

    fn header_json(&self) -> Result<Vec<u8>, ProtocolError> {
        let mut obj = Map::new();
        for (k, v) in &self.fields {
            if RESERVED_KEYS.contains(&k.as_str()) {
                return Err(ProtocolError::Encoding(format!(
                    "field name `{k}` is reserved"
                )));
            }
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("type".into(), Value::from(self.message_type.as_str()));
        obj.insert("session_id".into(), Value::from(self.session_id.clone()));
        obj.insert(
            "payload_frames".into(),
            Value::Array(
                self.payload_frames
                    .iter()
                    .map(|&(w, h)| Value::from(vec![w, h]))
                    .collect(),
            ),
        );
        serde_json::to_vec(&Value::Object(obj)).map_err(|e| ProtocolError::Encoding(e.to_string()))
    }
}

fn check_payload(frames: &[(u32, u32)], payload_len: u64) -> Result<(), ProtocolError> {
    let declared: u64 = frames.iter().map(|&(w, h)| byte_len(w, h) as u64).sum();
    if frames.iter().any(|&(w, h)| w == 0 || h == 0) {
        return Err(ProtocolError::Malformed("zero-sized payload frame".into()));
    }
    if declared != payload_len {
        return Err(ProtocolError::PayloadMismatch {
            declared,
            actual: payload_len,
        });
    }
    Ok(())
}

/// Serializes an envelope to its wire bytes.
pub fn encode_envelope(env: &Envelope) -> Result<Vec<u8>, ProtocolError> {
    encode_envelope_with(env, &ProtocolLimits::default())
}

pub fn encode_envelope_with(
    env: &Envelope,
    limits: &ProtocolLimits,
) -> Result<Vec<u8>, ProtocolError> {
    check_payload(&env.payload_frames, env.payload.len() as u64)
        .map_err(|e| ProtocolError::Encoding(e.to_string()))?;
    let header = env.header_json()?;
    if header.len() > limits.max_header_bytes {
        return Err(ProtocolError::HeaderTooLarge {
            len: header.len() as u64,
            max: limits.max_header_bytes as u64,
        });
    }
    let mut out = Vec::with_capacity(4 + header.len() + 8 + env.payload.len());
    out.extend_from_slice(&(header.len() as u32).to_be_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(env.payload.len() as u64).to_be_bytes());
    out.extend_from_slice(&env.payload);
    Ok(out)
}

fn parse_header(bytes: &[u8], payload: Vec<u8>) -> Result<Envelope, ProtocolError> {
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| ProtocolError::Malformed(format!("header is not JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(ProtocolError::Malformed(
            "header is not a JSON object".into(),
        ));
    };
    let message_type = match obj.remove("type") {
        Some(Value::String(s)) => s
            .parse::<MessageType>()
            .map_err(|_| ProtocolError::Malformed(format!("unknown message type `{s}`")))?,
        _ => return Err(ProtocolError::Malformed("missing `type`".into())),
    };
    let session_id = match obj.remove("session_id") {
        Some(Value::String(s)) => s,
        _ => return Err(ProtocolError::Malformed("missing `session_id`".into())),
    };
    let payload_frames = match obj.remove("payload_frames") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| {
                let pair = item.as_array().filter(|a| a.len() == 2);
                let dim = |v: &Value| v.as_u64().and_then(|n| u32::try_from(n).ok());
                pair.and_then(|a| Some((dim(&a[0])?, dim(&a[1])?)))
                    .ok_or_else(|| ProtocolError::Malformed("bad `payload_frames` entry".into()))
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(ProtocolError::Malformed("missing `payload_frames`".into())),
    };
    check_payload(&payload_frames, payload.len() as u64)?;
    Ok(Envelope {
        message_type,
        session_id,
        fields: obj,
        payload_frames,
        payload,
    })
}

/// Decodes one envelope from the front of `bytes`, returning it with the
/// number of bytes consumed. A short buffer yields [`ProtocolError::Incomplete`].
pub fn decode_envelope(bytes: &[u8]) -> Result<(Envelope, usize), ProtocolError> {
    decode_envelope_with(bytes, &ProtocolLimits::default())
}

pub fn decode_envelope_with(
    bytes: &[u8],
    limits: &ProtocolLimits,
) -> Result<(Envelope, usize), ProtocolError> {
    let need = |n: usize| {
        if bytes.len() < n {
            Err(ProtocolError::Incomplete {
                needed: n,
                available: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(4)?;
    let header_len = u32::from_be_bytes(bytes[0..4].try_into().unwrap()) as usize;
    if header_len > limits.max_header_bytes {
        return Err(ProtocolError::HeaderTooLarge {
            len: header_len as u64,
            max: limits.max_header_bytes as u64,
        });
    }
    need(4 + header_len + 8)?;
    let header = &bytes[4..4 + header_len];
    let p = 4 + header_len;
    let payload_len = u64::from_be_bytes(bytes[p..p + 8].try_into().unwrap());
    if payload_len > limits.max_payload_bytes {
        return Err(ProtocolError::PayloadTooLarge {
            len: payload_len,
            max: limits.max_payload_bytes,
        });
    }
    let total = p + 8 + payload_len as usize;
    need(total)?;
    let env = parse_header(header, bytes[p + 8..total].to_vec())?;
    Ok((env, total))
}

/// Incremental decoder: feed arbitrary slices, pull complete envelopes.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    limits: ProtocolLimits,
}

impl StreamDecoder {
    pub fn new(limits: ProtocolLimits) -> Self {
        Self {
            buf: Vec::new(),
            limits,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Returns the next complete envelope, or `None` if more bytes are needed.
    pub fn next_envelope(&mut self) -> Result<Option<Envelope>, ProtocolError> {
        match decode_envelope_with(&self.buf, &self.limits) {
            Ok((env, used)) => {
                self.buf.drain(..used);
                Ok(Some(env))
            }
            Err(ProtocolError::Incomplete { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

/// Blocking read of exactly one envelope.
pub fn read_envelope<R: Read>(
    reader: &mut R,
    limits: &ProtocolLimits,
) -> Result<Envelope, ProtocolError> {
    let mut len4 = [0u8; 4];
    reader.read_exact(&mut len4)?;
    let header_len = u32::from_be_bytes(len4) as usize;
    if header_len > limits.max_header_bytes {
        return Err(ProtocolError::HeaderTooLarge {
            len: header_len as u64,
            max: limits.max_header_bytes as u64,
        });
    }
    let mut header = vec![0u8; header_len];
    reader.read_exact(&mut header)?;
    let mut len8 = [0u8; 8];
    reader.read_exact(&mut len8)?;
    let payload_len = u64::from_be_bytes(len8);
    if payload_len > limits.max_payload_bytes {
        return Err(ProtocolError::PayloadTooLarge {
            len: payload_len,
            max: limits.max_payload_bytes,
        });
    }
    let mut payload = vec![0u8; payload_len as usize];
    reader.read_exact(&mut payload)?;
    parse_header(&header, payload)
}

pub fn write_envelope<W: Write>(
    writer: &mut W,
    env: &Envelope,
    limits: &ProtocolLimits,
) -> Result<(), ProtocolError> {
    let bytes = encode_envelope_with(env, limits)?;
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}
