use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fnv1a;
use super::sandbox::{decode_state, sandbox_render, sandbox_step, SandboxParams};
use crate::action::ActionChunk;
use crate::backend::{BackendError, WorldModelBackend};
use crate::frame::Frame;

/// World model that re-derives the scene from the conditioning frame, steps
/// the sandbox physics and renders one frame per action.
///
/// Randomness is a pure function of `(params.seed, request seed, state
/// pixels, actions)`, so identical requests always return identical frames.
#[derive(Debug, Clone)]
pub struct SandboxWorldModel {
    params: SandboxParams,
}

impl SandboxWorldModel {
    pub fn new(params: SandboxParams) -> Result<Self, BackendError> {
        params.validate().map_err(BackendError::Config)?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &SandboxParams {
        &self.params
    }
}

impl WorldModelBackend for SandboxWorldModel {
    fn predict_frames(
        &mut self,
        state: &Frame,
        actions: &ActionChunk,
        seed: u64,
    ) -> Result<Vec<Frame>, BackendError> {
        let mut scene = decode_state(state)
            .map_err(|e| BackendError::remote("UNDECODABLE_FRAME", e.to_string()))?;
        let action_bytes = serde_json::to_vec(actions)
            .map_err(|e| BackendError::remote("BAD_REQUEST", e.to_string()))?;
        let mix = fnv1a(&[
            &self.params.seed.to_be_bytes(),
            &seed.to_be_bytes(),
            state.data(),
            &action_bytes,
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(mix);
        let (w, h) = state.dims();
        let mut frames = Vec::with_capacity(actions.len());
        for action in &actions.actions {
            scene = sandbox_step(&scene, action, &self.params, &mut rng);
            frames.push(sandbox_render(&scene, w, h));
        }
        Ok(frames)
    }
}
