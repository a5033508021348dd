//! Evaluation harness for robot policies run inside an action-conditioned
//! video world model.
//!
//! The crate covers the wire protocol spoken with model servers, the
//! closed-loop rollout engine, chunked video classification, agreement and
//! correlation statistics, frame fidelity metrics, deterministic mock
//! backends and the on-disk run store.

pub mod action;
pub mod backend;
pub mod fidelity;
pub mod frame;
pub mod fusion;
pub mod mock;
pub mod protocol;
pub mod registry;
pub mod rollout;
pub mod stats;
pub mod store;

pub use action::{Action, ActionChunk, ArmDelta, Quat};
pub use backend::{BackendError, ChunkClassifier, PolicyBackend, WorldModelBackend};
pub use frame::{Frame, VideoClip};
