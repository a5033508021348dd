//! RGB8 frames and uniform-size video clips.

use thiserror::Error;

pub const CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame data length {actual} does not match {width}x{height}x3 = {expected}")]
    DataLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("frame has zero width or height")]
    Empty,
    #[error("clip frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        index: usize,
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
}

/// A single row-major RGB8 observation.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("bytes", &self.data.len())
            .finish()
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Empty);
        }
        let expected = byte_len(width, height);
        if data.len() != expected {
            return Err(FrameError::DataLength {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// A frame filled with one colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * CHANNELS);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Number of payload bytes for a `width`x`height` RGB8 frame.
pub fn byte_len(width: u32, height: u32) -> usize {
    width as usize * height as usize * CHANNELS
}

/// Ordered frames of one size at a nominal rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    width: u32,
    height: u32,
    rate_hz: u32,
    frames: Vec<Frame>,
}

impl VideoClip {
    pub fn empty(width: u32, height: u32, rate_hz: u32) -> Self {
        Self {
            width,
            height,
            rate_hz,
            frames: Vec::new(),
        }
    }

    pub fn from_frames(
        width: u32,
        height: u32,
        rate_hz: u32,
        frames: Vec<Frame>,
    ) -> Result<Self, FrameError> {
        let mut clip = Self::empty(width, height, rate_hz);
        for f in frames {
            clip.push(f)?;
        }
        Ok(clip)
    }

    pub fn push(&mut self, frame: Frame) -> Result<(), FrameError> {
        if frame.dims() != (self.width, self.height) {
            return Err(FrameError::SizeMismatch {
                index: self.frames.len(),
                want_w: self.width,
                want_h: self.height,
                got_w: frame.width,
                got_h: frame.height,
            });
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn truncate(&mut self, len: usize) {
        self.frames.truncate(len);
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rate_hz(&self) -> u32 {
        self.rate_hz
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn last(&self) -> Option<&Frame> {
        self.frames.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        let err = Frame::new(2, 2, vec![0; 11]).unwrap_err();
        assert!(matches!(err, FrameError::DataLength { expected: 12, .. }));
    }

    #[test]
    fn clip_rejects_mixed_sizes() {
        let mut clip = VideoClip::empty(4, 4, 10);
        clip.push(Frame::filled(4, 4, [1, 2, 3])).unwrap();
        assert!(clip.push(Frame::filled(4, 5, [1, 2, 3])).is_err());
        assert_eq!(clip.len(), 1);
    }

    #[test]
    fn pixel_access_is_row_major() {
        let mut f = Frame::filled(3, 2, [0, 0, 0]);
        f.set_pixel(2, 1, [9, 8, 7]);
        assert_eq!(&f.data()[15..18], &[9, 8, 7]);
        assert_eq!(f.pixel(2, 1), [9, 8, 7]);
    }
}
