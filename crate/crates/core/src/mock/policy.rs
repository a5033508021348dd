use std::path::Path;

use super::sandbox::{decode_state, SandboxState};
use super::{fnv1a, ParamMap};
use crate::action::{Action, ActionChunk, ArmDelta};
use crate::backend::{BackendError, PolicyBackend};
use crate::frame::Frame;

fn chunk(actions: Vec<Action>, rate_hz: u32) -> Result<ActionChunk, BackendError> {
    ActionChunk::new(actions, rate_hz).map_err(|e| BackendError::remote("INTERNAL", e.to_string()))
}

/// Holds still with an open jaw.
#[derive(Debug, Clone)]
pub struct ZeroPolicy {
    pub rate_hz: u32,
    pub chunk_len: usize,
}

impl Default for ZeroPolicy {
    fn default() -> Self {
        Self {
            rate_hz: 10,
            chunk_len: 12,
        }
    }
}

impl PolicyBackend for ZeroPolicy {
    fn predict_actions(&mut self, _: &Frame, _: &str) -> Result<ActionChunk, BackendError> {
        chunk(
            vec![Action::single(ArmDelta::still(1.0)); self.chunk_len],
            self.rate_hz,
        )
    }
}

/// Replays pre-authored chunks in order, then keeps repeating the last one.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    chunks: Vec<ActionChunk>,
    next: usize,
}

impl ScriptedPolicy {
    pub fn new(chunks: Vec<ActionChunk>) -> Result<Self, BackendError> {
        if chunks.is_empty() {
            return Err(BackendError::Config("script has no chunks".into()));
        }
        for c in &chunks {
            c.validate()
                .map_err(|e| BackendError::Config(format!("script chunk invalid: {e}")))?;
        }
        Ok(Self { chunks, next: 0 })
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read {}: {e}", path.display())))?;
        let chunks: Vec<ActionChunk> = serde_json::from_str(&text)
            .map_err(|e| BackendError::Config(format!("bad script {}: {e}", path.display())))?;
        Self::new(chunks)
    }
}

impl PolicyBackend for ScriptedPolicy {
    fn reset(&mut self) -> Result<(), BackendError> {
        self.next = 0;
        Ok(())
    }

    fn predict_actions(&mut self, _: &Frame, _: &str) -> Result<ActionChunk, BackendError> {
        let i = self.next.min(self.chunks.len() - 1);
        self.next += 1;
        Ok(self.chunks[i].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProportionalSettings {
    pub rate_hz: u32,
    pub chunk_len: usize,
    /// Maximum gripper speed in scene units per second.
    pub speed: f64,
    /// Fraction of episodes (by initial observation) that aim beside the needle.
    pub near_miss_fraction: f64,
    pub near_miss_offset: f64,
}

impl Default for ProportionalSettings {
    fn default() -> Self {
        Self {
            rate_hz: 30,
            chunk_len: 48,
            speed: 0.3,
            near_miss_fraction: 0.0,
            near_miss_offset: 0.1,
        }
    }
}

impl ProportionalSettings {
    pub fn at_rate(rate_hz: u32) -> Self {
        Self {
            rate_hz,
            chunk_len: (rate_hz as usize * 16).div_ceil(10),
            ..Self::default()
        }
    }

    pub fn from_params(p: &ParamMap) -> Result<Self, String> {
        let rate_hz = p.u32_or("rate", 30)?;
        if rate_hz < 10 {
            return Err(format!("rate must be at least 10 Hz, got {rate_hz}"));
        }
        let d = Self::at_rate(rate_hz);
        let s = Self {
            rate_hz,
            chunk_len: p.usize_or("chunk_len", d.chunk_len)?,
            speed: p.f64_or("speed", d.speed)?,
            near_miss_fraction: p.f64_or("near_miss", d.near_miss_fraction)?,
            near_miss_offset: p.f64_or("near_miss_offset", d.near_miss_offset)?,
        };
        if s.chunk_len == 0 || !(s.speed > 0.0) || !(0.0..=1.0).contains(&s.near_miss_fraction) {
            return Err("chunk_len and speed must be positive, near_miss in [0, 1]".into());
        }
        Ok(s)
    }
}

/// Whether an episode starting from `observation` is a near-miss episode.
pub fn is_near_miss(observation: &Frame, fraction: f64) -> bool {
    let u = (fnv1a(&[observation.data()]) >> 11) as f64 / (1u64 << 53) as f64;
    u < fraction
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Approach,
    Carry,
    Done,
}

/// Closed-loop pick-and-place: approach the needle, close, carry it to the
/// goal, open, then idle. One attempt per episode.
///
/// In a near-miss episode the approach target is offset from the needle
/// toward the goal by `near_miss_offset`, so the jaw closes on nothing.
#[derive(Debug, Clone)]
pub struct ProportionalPolicy {
    settings: ProportionalSettings,
    phase: Phase,
    near_miss: Option<bool>,
}

impl ProportionalPolicy {
    pub fn new(settings: ProportionalSettings) -> Self {
        Self {
            settings,
            phase: Phase::Approach,
            near_miss: None,
        }
    }

    fn approach_target(&self, s: &SandboxState) -> [f64; 2] {
        if self.near_miss != Some(true) {
            return s.needle;
        }
        let d = [s.goal[0] - s.needle[0], s.goal[1] - s.needle[1]];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if n == 0.0 {
            return s.needle;
        }
        let k = self.settings.near_miss_offset / n;
        [s.needle[0] + k * d[0], s.needle[1] + k * d[1]]
    }

    fn hold(&self, jaw: f64) -> Result<ActionChunk, BackendError> {
        chunk(
            vec![Action::single(ArmDelta::still(jaw)); self.settings.chunk_len],
            self.settings.rate_hz,
        )
    }

    fn move_to(&self, from: [f64; 2], to: [f64; 2], jaw: f64) -> Result<ActionChunk, BackendError> {
        let step = self.settings.speed / self.settings.rate_hz as f64;
        let mut cur = from;
        let mut actions = Vec::with_capacity(self.settings.chunk_len);
        for _ in 0..self.settings.chunk_len {
            let mut d = [to[0] - cur[0], to[1] - cur[1]];
            let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if n > step {
                d = [d[0] * step / n, d[1] * step / n];
            }
            cur = [cur[0] + d[0], cur[1] + d[1]];
            actions.push(Action::single(ArmDelta::translate([d[0], d[1], 0.0], jaw)));
        }
        chunk(actions, self.settings.rate_hz)
    }
}

fn arrived(at: [f64; 2], target: [f64; 2], frame: &Frame) -> bool {
    let tol_x = 0.5 / frame.width() as f64 + 1e-9;
    let tol_y = 0.5 / frame.height() as f64 + 1e-9;
    (at[0] - target[0]).abs() <= tol_x && (at[1] - target[1]).abs() <= tol_y
}

impl PolicyBackend for ProportionalPolicy {
    fn reset(&mut self) -> Result<(), BackendError> {
        self.phase = Phase::Approach;
        self.near_miss = None;
        Ok(())
    }

    fn predict_actions(
        &mut self,
        observation: &Frame,
        _: &str,
    ) -> Result<ActionChunk, BackendError> {
        let s = decode_state(observation)
            .map_err(|e| BackendError::remote("UNDECODABLE_FRAME", e.to_string()))?;
        if self.near_miss.is_none() {
            self.near_miss = Some(is_near_miss(observation, self.settings.near_miss_fraction));
        }
        match self.phase {
            Phase::Approach => {
                let target = self.approach_target(&s);
                if arrived(s.gripper, target, observation) {
                    self.phase = Phase::Carry;
                    self.hold(0.0)
                } else {
                    self.move_to(s.gripper, target, 1.0)
                }
            }
            Phase::Carry => {
                if arrived(s.gripper, s.goal, observation) {
                    self.phase = Phase::Done;
                    self.hold(1.0)
                } else {
                    self.move_to(s.gripper, s.goal, 0.0)
                }
            }
            Phase::Done => self.hold(1.0),
        }
    }
}
