//! The autoregressive evaluation loop for one trial and seed.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::resample::{resample_chunk, truncate_to_horizon, DEFAULT_HORIZON, TARGET_RATE_HZ};
use super::task::TaskDefinition;
use crate::action::ActionChunk;
use crate::backend::{BackendError, PolicyBackend, WorldModelBackend};
use crate::frame::{Frame, VideoClip};
use crate::protocol::check_generated;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub task: TaskDefinition,
    pub trial_index: u32,
    pub initial_frame: Arc<Frame>,
    pub seeds: Vec<u64>,
    pub policy_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutConfig {
    pub horizon: usize,
    pub target_rate_hz: u32,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            target_rate_hz: TARGET_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    StepLimit,
    BackendError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub raw: ActionChunk,
    pub executed: ActionChunk,
}

/// Identity of one rollout within a campaign.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RolloutKey {
    pub task: String,
    pub trial: u32,
    pub seed: u64,
    pub policy_id: String,
}

impl RolloutKey {
    /// Stable textual id, `policy:task:trial:seed`.
    pub fn id(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.policy_id, self.task, self.trial, self.seed
        )
    }

    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.split(':');
        let policy_id = parts.next()?.to_owned();
        let task = parts.next()?.to_owned();
        let trial = parts.next()?.parse().ok()?;
        let seed = parts.next()?.parse().ok()?;
        if parts.next().is_some() || policy_id.is_empty() || task.is_empty() {
            return None;
        }
        Some(Self {
            task,
            trial,
            seed,
            policy_id,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutRecord {
    pub key: RolloutKey,
    pub initial_frame: Arc<Frame>,
    /// Generated frames only; the initial frame is kept separately.
    pub video: VideoClip,
    pub action_log: Vec<IterationLog>,
    pub steps_executed: usize,
    pub termination: Termination,
    pub error: Option<String>,
}

impl RolloutRecord {
    fn fail(&mut self, e: BackendError) {
        self.termination = match e {
            BackendError::Timeout => Termination::Timeout,
            _ => Termination::BackendError,
        };
        self.error = Some(e.to_string());
    }
}

pub(crate) fn empty_record(spec: &TrialSpec, seed: u64) -> RolloutRecord {
    let (w, h) = spec.initial_frame.dims();
    RolloutRecord {
        key: RolloutKey {
            task: spec.task.name.clone(),
            trial: spec.trial_index,
            seed,
            policy_id: spec.policy_id.clone(),
        },
        initial_frame: spec.initial_frame.clone(),
        video: VideoClip::empty(w, h, TARGET_RATE_HZ),
        action_log: Vec::new(),
        steps_executed: 0,
        termination: Termination::StepLimit,
        error: None,
    }
}

pub(crate) fn failed_record(spec: &TrialSpec, seed: u64, e: BackendError) -> RolloutRecord {
    let mut record = empty_record(spec, seed);
    record.fail(e);
    record
}

/// Runs the policy / world-model loop until the task's step limit.
///
/// Each iteration: query the policy on the current frame, resample the chunk
/// to the world-model rate, keep the first `horizon` actions, generate one
/// frame per action, and continue from the last generated frame. Frames past
/// the step limit are discarded. Backend failures end the rollout early and
/// keep the partial video.
pub fn run_rollout(
    spec: &TrialSpec,
    seed: u64,
    policy: &mut dyn PolicyBackend,
    world: &mut dyn WorldModelBackend,
    config: &RolloutConfig,
) -> RolloutRecord {
    let mut record = empty_record(spec, seed);
    if let Err(e) = policy.reset().and_then(|_| world.reset()) {
        record.fail(e);
        return record;
    }
    let limit = spec.task.step_limit as usize;
    let mut state: Frame = (*spec.initial_frame).clone();
    while record.steps_executed < limit {
        let raw = match policy.predict_actions(&state, &spec.task.name) {
            Ok(c) => c,
            Err(e) => {
                record.fail(e);
                break;
            }
        };
        let executed = match resample_chunk(&raw, config.target_rate_hz) {
            Ok(c) => truncate_to_horizon(&c, config.horizon),
            Err(e) => {
                record.fail(BackendError::Protocol(format!(
                    "policy chunk rejected: {e}"
                )));
                break;
            }
        };
        let frames = match world
            .predict_frames(&state, &executed, seed)
            .and_then(|f| check_generated(&state, config.horizon, &f).map(|_| f))
        {
            Ok(f) => f,
            Err(e) => {
                record.fail(e);
                break;
            }
        };
        record.action_log.push(IterationLog { raw, executed });
        state = frames[frames.len() - 1].clone();
        let keep = (limit - record.steps_executed).min(frames.len());
        for f in frames.into_iter().take(keep) {
            record
                .video
                .push(f)
                .expect("frame size checked against state");
        }
        record.steps_executed += keep;
    }
    record
}
