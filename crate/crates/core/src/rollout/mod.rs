//! Rollout orchestration: resampling, the autoregressive loop, campaigns.

mod campaign;
mod engine;
mod manifest;
mod real_results;
mod resample;
mod task;

pub use campaign::{run_campaign, run_campaign_with, SessionSource};
pub use engine::{
    run_rollout, IterationLog, RolloutConfig, RolloutKey, RolloutRecord, Termination, TrialSpec,
};
pub(crate) use manifest::valid_name;
pub use manifest::{EndpointEntry, ManifestError, OptionalEndpoint, PolicyEntry, RunManifest};
pub use real_results::{
    ingest_real_results, load_frame, parse_real_results, FrameLoadError, IngestError, RealResult,
    CSV_HEADER,
};
pub use resample::{resample_chunk, truncate_to_horizon, DEFAULT_HORIZON, TARGET_RATE_HZ};
pub use task::{catalog, lookup as lookup_task, Domain, TaskDefinition};
