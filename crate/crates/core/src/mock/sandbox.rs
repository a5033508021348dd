//! A 2D pixel-physics sandbox: one gripper, one needle, one goal.
//!
//! The scene state is recovered from pixels alone, so the only thing that
//! crosses the policy/world-model boundary is the rendered frame. Gripper
//! colour carries the jaw and grasp bits.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ParamMap;
use crate::action::Action;
use crate::frame::Frame;

pub const BACKGROUND: [u8; 3] = [0, 0, 0];
pub const GOAL_COLOR: [u8; 3] = [0, 255, 0];
pub const NEEDLE_COLOR: [u8; 3] = [255, 0, 0];
pub const GRIPPER_OPEN: [u8; 3] = [255, 255, 255];
pub const GRIPPER_CLOSED: [u8; 3] = [255, 255, 128];
pub const GRIPPER_GRASPING: [u8; 3] = [255, 255, 0];

pub const GOAL_HALF: i64 = 2;
pub const NEEDLE_HALF: i64 = 1;
pub const GRIPPER_HALF: i64 = 2;

/// Consecutive-frame needle displacement above which motion is non-physical.
pub const TELEPORT_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandboxState {
    pub gripper: [f64; 2],
    pub needle: [f64; 2],
    pub goal: [f64; 2],
    pub grasped: bool,
    pub jaw: f64,
}

impl SandboxState {
    pub fn is_closed(&self) -> bool {
        self.jaw < 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandboxParams {
    pub attach_radius: f64,
    pub action_scale: f64,
    pub false_attach_prob: f64,
    pub seed: u64,
}

impl Default for SandboxParams {
    fn default() -> Self {
        Self {
            attach_radius: 0.05,
            action_scale: 1.0,
            false_attach_prob: 0.0,
            seed: 0,
        }
    }
}

impl SandboxParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.attach_radius > 0.0 && self.attach_radius.is_finite()) {
            return Err(format!(
                "attach_radius must be > 0, got {}",
                self.attach_radius
            ));
        }
        if !(0.0..=1.0).contains(&self.false_attach_prob) {
            return Err(format!(
                "false_attach_prob must be in [0, 1], got {}",
                self.false_attach_prob
            ));
        }
        if !self.action_scale.is_finite() {
            return Err("action_scale must be finite".into());
        }
        Ok(())
    }

    pub fn from_params(params: &ParamMap) -> Result<Self, String> {
        let d = Self::default();
        let p = Self {
            attach_radius: params.f64_or("attach_radius", d.attach_radius)?,
            action_scale: params.f64_or("action_scale", d.action_scale)?,
            false_attach_prob: params.f64_or("false_attach_prob", d.false_attach_prob)?,
            seed: params.u64_or("seed", d.seed)?,
        };
        p.validate()?;
        Ok(p)
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Advances the scene by one action (arm 0 drives the gripper).
///
/// A spurious grasp can only happen when the jaw goes from open to closed,
/// and the random draw is made only in that case.
pub fn sandbox_step<R: Rng>(
    state: &SandboxState,
    action: &Action,
    params: &SandboxParams,
    rng: &mut R,
) -> SandboxState {
    let mut next = *state;
    let Some(arm) = action.arms.first() else {
        return next;
    };
    next.gripper = [
        clamp01(state.gripper[0] + params.action_scale * arm.translation[0]),
        clamp01(state.gripper[1] + params.action_scale * arm.translation[1]),
    ];
    next.jaw = arm.jaw.clamp(0.0, 1.0);
    if !next.is_closed() {
        next.grasped = false;
    } else if !state.grasped {
        let closing = !state.is_closed();
        let near = distance(next.gripper, state.needle) <= params.attach_radius;
        next.grasped = near
            || (closing
                && params.false_attach_prob > 0.0
                && rng.random::<f64>() < params.false_attach_prob);
    }
    if next.grasped {
        next.needle = next.gripper;
    }
    next
}

/// `floor(pos·dim)` clamped to the image.
pub fn to_pixel(pos: f64, dim: u32) -> i64 {
    ((pos * dim as f64).floor() as i64).clamp(0, dim as i64 - 1)
}

/// Centre of pixel `px` in unit coordinates.
pub fn from_pixel(px: i64, dim: u32) -> f64 {
    (px as f64 + 0.5) / dim as f64
}

fn fill_block(frame: &mut Frame, cx: i64, cy: i64, half: i64, rgb: [u8; 3]) {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    for y in (cy - half).max(0)..=(cy + half).min(h - 1) {
        for x in (cx - half).max(0)..=(cx + half).min(w - 1) {
            frame.set_pixel(x as u32, y as u32, rgb);
        }
    }
}

pub fn gripper_color(state: &SandboxState) -> [u8; 3] {
    match (state.is_closed(), state.grasped) {
        (false, _) => GRIPPER_OPEN,
        (true, false) => GRIPPER_CLOSED,
        (true, true) => GRIPPER_GRASPING,
    }
}

pub fn sandbox_render(state: &SandboxState, width: u32, height: u32) -> Frame {
    let mut frame = Frame::filled(width, height, BACKGROUND);
    let px = |p: [f64; 2]| (to_pixel(p[0], width), to_pixel(p[1], height));
    let (gx, gy) = px(state.goal);
    fill_block(&mut frame, gx, gy, GOAL_HALF, GOAL_COLOR);
    let (nx, ny) = px(state.needle);
    fill_block(&mut frame, nx, ny, NEEDLE_HALF, NEEDLE_COLOR);
    let (rx, ry) = px(state.gripper);
    fill_block(&mut frame, rx, ry, GRIPPER_HALF, gripper_color(state));
    frame
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("frame is {0}x{1}; need at least 5x5")]
    TooSmall(u32, u32),
    #[error("unexpected colour {rgb:?} at ({x}, {y})")]
    UnknownColor { x: u32, y: u32, rgb: [u8; 3] },
    #[error("no gripper visible")]
    NoGripper,
    #[error("gripper pixels are not a single consistent block")]
    BadGripper,
    #[error("no {0} position is consistent with the visible pixels")]
    Inconsistent(&'static str),
}

/// Pixel-level decode result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelScene {
    pub gripper: (i64, i64),
    pub needle: (i64, i64),
    pub goal: (i64, i64),
    pub closed: bool,
    pub grasped: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Layer {
    Empty,
    Goal,
    Needle,
    Gripper,
}

fn in_block(x: i64, y: i64, c: (i64, i64), half: i64) -> bool {
    (x - c.0).abs() <= half && (y - c.1).abs() <= half
}

struct Scan {
    w: i64,
    h: i64,
    layers: Vec<Layer>,
}

impl Scan {
    fn at(&self, x: i64, y: i64) -> Layer {
        self.layers[(y * self.w + x) as usize]
    }

    fn bbox(&self, layer: Layer) -> Option<(i64, i64, i64, i64, usize)> {
        let mut b: Option<(i64, i64, i64, i64, usize)> = None;
        for y in 0..self.h {
            for x in 0..self.w {
                if self.at(x, y) == layer {
                    b = Some(match b {
                        None => (x, x, y, y, 1),
                        Some((x0, x1, y0, y1, n)) => {
                            (x0.min(x), x1.max(x), y0.min(y), y1.max(y), n + 1)
                        }
                    });
                }
            }
        }
        b
    }

    /// Centre of a fully drawn (possibly edge-clipped) block along one axis.
    fn block_centre(lo: i64, hi: i64, half: i64, dim: i64) -> Option<i64> {
        let span = hi - lo + 1;
        if span == 2 * half + 1 {
            Some(lo + half)
        } else if lo == 0 && hi < dim - 1 {
            Some(hi - half)
        } else if hi == dim - 1 && lo > 0 {
            Some(lo + half)
        } else {
            None
        }
    }

    /// Finds the block centre whose unoccluded pixels are exactly the visible
    /// `layer` pixels. Among several consistent centres the one nearest
    /// `prefer` wins.
    fn locate(
        &self,
        layer: Layer,
        half: i64,
        occluded: &dyn Fn(i64, i64) -> bool,
        prefer: (i64, i64),
        name: &'static str,
    ) -> Result<(i64, i64), DecodeError> {
        let (xs, ys, count) = match self.bbox(layer) {
            Some((x0, x1, y0, y1, n)) => ((x1 - half, x0 + half), (y1 - half, y0 + half), n),
            None => ((0, self.w - 1), (0, self.h - 1), 0),
        };
        let mut best: Option<((i64, i64), i64)> = None;
        for cy in ys.0.max(0)..=ys.1.min(self.h - 1) {
            for cx in xs.0.max(0)..=xs.1.min(self.w - 1) {
                if count == 0 && !in_block(cx, cy, prefer, 2 * GRIPPER_HALF + GOAL_HALF) {
                    continue;
                }
                let mut seen = 0usize;
                let mut ok = true;
                'block: for y in (cy - half).max(0)..=(cy + half).min(self.h - 1) {
                    for x in (cx - half).max(0)..=(cx + half).min(self.w - 1) {
                        if occluded(x, y) {
                            continue;
                        }
                        if self.at(x, y) != layer {
                            ok = false;
                            break 'block;
                        }
                        seen += 1;
                    }
                }
                if ok && seen == count {
                    let d = (cx - prefer.0).pow(2) + (cy - prefer.1).pow(2);
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some(((cx, cy), d));
                    }
                }
            }
        }
        best.map(|(c, _)| c).ok_or(DecodeError::Inconsistent(name))
    }
}

/// Recovers entity pixels from a rendered frame by colour scan.
///
/// Layers are resolved top-down (gripper, needle, goal); a partially or fully
/// hidden entity is placed at the consistent position nearest the gripper.
pub fn decode_pixels(frame: &Frame) -> Result<PixelScene, DecodeError> {
    let (w, h) = frame.dims();
    if w < 5 || h < 5 {
        return Err(DecodeError::TooSmall(w, h));
    }
    let mut layers = Vec::with_capacity((w * h) as usize);
    let mut gripper_rgb: Option<[u8; 3]> = None;
    for y in 0..h {
        for x in 0..w {
            let rgb = frame.pixel(x, y);
            let layer = match rgb {
                BACKGROUND => Layer::Empty,
                GOAL_COLOR => Layer::Goal,
                NEEDLE_COLOR => Layer::Needle,
                GRIPPER_OPEN | GRIPPER_CLOSED | GRIPPER_GRASPING => {
                    if gripper_rgb.is_some_and(|g| g != rgb) {
                        return Err(DecodeError::BadGripper);
                    }
                    gripper_rgb = Some(rgb);
                    Layer::Gripper
                }
                _ => return Err(DecodeError::UnknownColor { x, y, rgb }),
            };
            layers.push(layer);
        }
    }
    let scan = Scan {
        w: w as i64,
        h: h as i64,
        layers,
    };

    let (x0, x1, y0, y1, n) = scan.bbox(Layer::Gripper).ok_or(DecodeError::NoGripper)?;
    let gx = Scan::block_centre(x0, x1, GRIPPER_HALF, scan.w).ok_or(DecodeError::BadGripper)?;
    let gy = Scan::block_centre(y0, y1, GRIPPER_HALF, scan.h).ok_or(DecodeError::BadGripper)?;
    let gripper = (gx, gy);
    let expected = ((x1 - x0 + 1) * (y1 - y0 + 1)) as usize;
    if n != expected
        || x0 != (gx - GRIPPER_HALF).max(0)
        || x1 != (gx + GRIPPER_HALF).min(scan.w - 1)
        || y0 != (gy - GRIPPER_HALF).max(0)
        || y1 != (gy + GRIPPER_HALF).min(scan.h - 1)
    {
        return Err(DecodeError::BadGripper);
    }

    let under_gripper = |x: i64, y: i64| in_block(x, y, gripper, GRIPPER_HALF);
    let needle = scan.locate(
        Layer::Needle,
        NEEDLE_HALF,
        &under_gripper,
        gripper,
        "needle",
    )?;
    let under_both = |x: i64, y: i64| under_gripper(x, y) || in_block(x, y, needle, NEEDLE_HALF);
    let goal = scan.locate(Layer::Goal, GOAL_HALF, &under_both, gripper, "goal")?;

    let rgb = gripper_rgb.ok_or(DecodeError::NoGripper)?;
    Ok(PixelScene {
        gripper,
        needle,
        goal,
        closed: rgb != GRIPPER_OPEN,
        grasped: rgb == GRIPPER_GRASPING,
    })
}

/// Decodes a frame into a state with positions at pixel centres.
pub fn decode_state(frame: &Frame) -> Result<SandboxState, DecodeError> {
    let s = decode_pixels(frame)?;
    let (w, h) = frame.dims();
    let pos = |p: (i64, i64)| [from_pixel(p.0, w), from_pixel(p.1, h)];
    Ok(SandboxState {
        gripper: pos(s.gripper),
        needle: pos(s.needle),
        goal: pos(s.goal),
        grasped: s.grasped,
        jaw: if s.closed { 0.0 } else { 1.0 },
    })
}

/// Minimum needle-to-goal separation in generated layouts.
pub const LAYOUT_MIN_TASK_DISTANCE: f64 = 0.3;

/// A random starting scene: open empty gripper, needle well away from the goal.
pub fn initial_layout(seed: u64) -> SandboxState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
    loop {
        let gripper = point(&mut rng);
        let needle = point(&mut rng);
        let goal = point(&mut rng);
        if distance(needle, goal) >= LAYOUT_MIN_TASK_DISTANCE
            && distance(gripper, needle) >= 0.15
            && distance(gripper, goal) >= 0.15
        {
            return SandboxState {
                gripper,
                needle,
                goal,
                grasped: false,
                jaw: 1.0,
            };
        }
    }
}
