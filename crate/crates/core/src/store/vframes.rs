//! `.vframes`: a raw RGB8 video container.
//!
//! Big-endian header: magic `VFRM`, u16 version (1), u16 channels (3),
//! u32 width, u32 height, u32 frame count, u32 rate in Hz; then the frames
//! back to back, row-major.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::frame::{byte_len, Frame, VideoClip};

pub const MAGIC: &[u8; 4] = b"VFRM";
pub const VERSION: u16 = 1;
pub const CHANNELS: u16 = 3;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum VframesError {
    #[error("not a vframes file (bad magic)")]
    BadMagic,
    #[error("unsupported vframes version {0}")]
    Version(u16),
    #[error("unsupported channel count {0}")]
    Channels(u16),
    #[error("truncated vframes data: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{actual} bytes of vframes data where {expected} were expected")]
    LengthMismatch { expected: u64, actual: u64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub fn encode(clip: &VideoClip) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(HEADER_LEN + clip.len() * byte_len(clip.width(), clip.height()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_be_bytes());
    out.extend_from_slice(&CHANNELS.to_be_bytes());
    out.extend_from_slice(&clip.width().to_be_bytes());
    out.extend_from_slice(&clip.height().to_be_bytes());
    out.extend_from_slice(&(clip.len() as u32).to_be_bytes());
    out.extend_from_slice(&clip.rate_hz().to_be_bytes());
    for f in clip.frames() {
        out.extend_from_slice(f.data());
    }
    out
}

/// Parsed header fields: `(width, height, count, rate_hz)`.
pub fn decode_header(bytes: &[u8]) -> Result<(u32, u32, u32, u32), VframesError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(VframesError::BadMagic);
        }
        return Err(VframesError::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(VframesError::BadMagic);
    }
    let u16_at = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
    let u32_at = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = u16_at(4);
    if version != VERSION {
        return Err(VframesError::Version(version));
    }
    let channels = u16_at(6);
    if channels != CHANNELS {
        return Err(VframesError::Channels(channels));
    }
    Ok((u32_at(8), u32_at(12), u32_at(16), u32_at(20)))
}

pub fn decode(bytes: &[u8]) -> Result<VideoClip, VframesError> {
    let (w, h, count, rate) = decode_header(bytes)?;
    let frame_len = byte_len(w, h) as u64;
    let expected = HEADER_LEN as u64 + frame_len * count as u64;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(VframesError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(VframesError::LengthMismatch { expected, actual });
    }
    let mut clip = VideoClip::empty(w, h, rate);
    if frame_len > 0 {
        for chunk in bytes[HEADER_LEN..].chunks_exact(frame_len as usize) {
            let frame = Frame::new(w, h, chunk.to_vec()).expect("chunk has frame length");
            clip.push(frame).expect("frame has clip size");
        }
    }
    Ok(clip)
}

pub fn read_file(path: &Path) -> Result<VideoClip, VframesError> {
    let bytes = std::fs::read(path).map_err(|source| VframesError::Io {
        path: path.to_owned(),
        source,
    })?;
    decode(&bytes)
}

pub fn write_file(path: &Path, clip: &VideoClip) -> Result<(), VframesError> {
    super::write_atomic(path, &encode(clip)).map_err(|source| VframesError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes one frame as PNG.
pub fn encode_png(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut out);
    image::ImageEncoder::write_image(
        encoder,
        frame.data(),
        frame.width(),
        frame.height(),
        image::ExtendedColorType::Rgb8,
    )
    .expect("in-memory png encode");
    out.flush().expect("in-memory flush");
    out
}
