//! Relative-pose actions and action chunks.
//!
//! Each action carries, per arm, a relative translation (meters), a relative
//! rotation as a unit quaternion `(w, x, y, z)` and an absolute jaw opening.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUAT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ActionError {
    #[error("action chunk is empty")]
    EmptyChunk,
    #[error("action {index}: arm count {arms} is not 1 or 2")]
    ArmCount { index: usize, arms: usize },
    #[error("action {index}: arm count {arms} differs from first action ({first})")]
    MixedArms {
        index: usize,
        arms: usize,
        first: usize,
    },
    #[error("action {index}: quaternion norm {norm} is not unit")]
    NonUnitRotation { index: usize, norm: f64 },
    #[error("action {index}: jaw {jaw} outside [0, 1]")]
    JawRange { index: usize, jaw: f64 },
    #[error("action {index}: non-finite value")]
    NonFinite { index: usize },
    #[error("rate {0} Hz is not supported")]
    Rate(u32),
}

/// Quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(v: [f64; 4]) -> Self {
        Self {
            w: v[0],
            x: v[1],
            y: v[2],
            z: v[3],
        }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self {
            w: c,
            x: s * axis[0] / n,
            y: s * axis[1] / n,
            z: s * axis[2] / n,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Hamilton product `self * rhs`: apply `self`, then `rhs` in the rotated frame.
    pub fn mul(self, rhs: Quat) -> Quat {
        let (a, b) = (self, rhs);
        Quat {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    /// Distance between the rotations `self` and `other`, insensitive to the sign ambiguity.
    pub fn distance(&self, other: &Quat) -> f64 {
        let d = |s: f64| {
            let (w, x, y, z) = (
                self.w - s * other.w,
                self.x - s * other.x,
                self.y - s * other.y,
                self.z - s * other.z,
            );
            (w * w + x * x + y * y + z * z).sqrt()
        };
        d(1.0).min(d(-1.0))
    }
}

/// Relative motion of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmDelta {
    pub translation: [f64; 3],
    pub rotation: Quat,
    pub jaw: f64,
}

impl ArmDelta {
    pub fn still(jaw: f64) -> Self {
        Self {
            translation: [0.0; 3],
            rotation: Quat::IDENTITY,
            jaw,
        }
    }

    pub fn translate(translation: [f64; 3], jaw: f64) -> Self {
        Self {
            translation,
            rotation: Quat::IDENTITY,
            jaw,
        }
    }
}

/// One control step for one or two arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action {
    pub arms: Vec<ArmDelta>,
}

impl Action {
    pub fn single(arm: ArmDelta) -> Self {
        Self { arms: vec![arm] }
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    fn validate(&self, index: usize) -> Result<(), ActionError> {
        let arms = self.arms.len();
        if !(1..=2).contains(&arms) {
            return Err(ActionError::ArmCount { index, arms });
        }
        for arm in &self.arms {
            let q = arm.rotation;
            let finite = arm.translation.iter().all(|v| v.is_finite())
                && [q.w, q.x, q.y, q.z].iter().all(|v| v.is_finite())
                && arm.jaw.is_finite();
            if !finite {
                return Err(ActionError::NonFinite { index });
            }
            let norm = q.norm();
            if (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
                return Err(ActionError::NonUnitRotation { index, norm });
            }
            if !(0.0..=1.0).contains(&arm.jaw) {
                return Err(ActionError::JawRange {
                    index,
                    jaw: arm.jaw,
                });
            }
        }
        Ok(())
    }
}

/// A policy output: ordered actions at a source rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub actions: Vec<Action>,
    pub rate_hz: u32,
}

impl ActionChunk {
    pub fn new(actions: Vec<Action>, rate_hz: u32) -> Result<Self, ActionError> {
        let chunk = Self { actions, rate_hz };
        chunk.validate()?;
        Ok(chunk)
    }

    pub fn validate(&self) -> Result<(), ActionError> {
        let first = self.actions.first().ok_or(ActionError::EmptyChunk)?;
        if self.rate_hz == 0 {
            return Err(ActionError::Rate(0));
        }
        let arms = first.arm_count();
        for (index, a) in self.actions.iter().enumerate() {
            a.validate(index)?;
            if a.arm_count() != arms {
                return Err(ActionError::MixedArms {
                    index,
                    arms: a.arm_count(),
                    first: arms,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn arm_count(&self) -> usize {
        self.actions.first().map_or(0, Action::arm_count)
    }
}
