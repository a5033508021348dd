use super::sandbox::{decode_pixels, TELEPORT_THRESHOLD};
use crate::backend::{BackendError, ChunkClassifier};
use crate::frame::Frame;
use crate::fusion::ChunkClass;
use crate::rollout::lookup_task;

/// Ground-truth chunk labeller for sandbox videos.
///
/// SUCCESS once a frame shows the needle block within one pixel of the goal
/// block centre; ANOMALY once the needle jumps more than
/// [`TELEPORT_THRESHOLD`] between consecutive frames. The earlier event in
/// the chunk wins.
#[derive(Debug, Clone, Default)]
pub struct OracleClassifier {
    tasks: Vec<String>,
}

impl OracleClassifier {
    /// Accepts the given task names, or the built-in catalog when empty.
    pub fn new(tasks: Vec<String>) -> Self {
        Self { tasks }
    }

    fn knows(&self, task: &str) -> bool {
        if self.tasks.is_empty() {
            lookup_task(task).is_some()
        } else {
            self.tasks.iter().any(|t| t == task)
        }
    }
}

impl ChunkClassifier for OracleClassifier {
    fn classify_chunk(
        &mut self,
        frames: &[Frame],
        task_name: &str,
    ) -> Result<ChunkClass, BackendError> {
        if !self.knows(task_name) {
            return Err(BackendError::remote(
                "UNKNOWN_TASK",
                format!("no task named `{task_name}`"),
            ));
        }
        let mut prev: Option<[f64; 2]> = None;
        for frame in frames {
            let s = decode_pixels(frame)
                .map_err(|e| BackendError::remote("UNDECODABLE_FRAME", e.to_string()))?;
            if (s.needle.0 - s.goal.0).abs() <= 1 && (s.needle.1 - s.goal.1).abs() <= 1 {
                return Ok(ChunkClass::Success);
            }
            let (w, h) = frame.dims();
            let pos = [s.needle.0 as f64 / w as f64, s.needle.1 as f64 / h as f64];
            if let Some(p) = prev {
                let jump = ((pos[0] - p[0]).powi(2) + (pos[1] - p[1]).powi(2)).sqrt();
                if jump > TELEPORT_THRESHOLD {
                    return Ok(ChunkClass::Anomaly);
                }
            }
            prev = Some(pos);
        }
        Ok(ChunkClass::Default)
    }
}
