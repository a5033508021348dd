//! Running many trial×seed rollouts on a bounded worker pool.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::engine::{failed_record, run_rollout, RolloutConfig, RolloutRecord, TrialSpec};
use crate::backend::{BackendError, PolicyBackend, WorldModelBackend};

/// Opens fresh backend sessions; each rollout owns its sessions exclusively.
pub trait SessionSource: Sync {
    fn open_policy(&self, policy_id: &str) -> Result<Box<dyn PolicyBackend>, BackendError>;
    fn open_world_model(&self) -> Result<Box<dyn WorldModelBackend>, BackendError>;
}

/// Runs every `spec × seed` once and returns the records in canonical
/// `(task, trial, seed, policy)` order, independent of completion order.
/// Session failures produce error-terminated records; the campaign always
/// completes.
pub fn run_campaign(
    specs: &[TrialSpec],
    sessions: &dyn SessionSource,
    parallelism: usize,
    config: &RolloutConfig,
) -> Vec<RolloutRecord> {
    let results = Mutex::new(Vec::new());
    run_campaign_with(specs, sessions, parallelism, config, &|r| {
        results.lock().unwrap().push(r)
    });
    let mut records = results.into_inner().unwrap();
    records.sort_by(|a, b| a.key.cmp(&b.key));
    records
}

/// Like [`run_campaign`] but hands each record to `sink` as soon as it is
/// finished, so videos need not all be held in memory.
pub fn run_campaign_with(
    specs: &[TrialSpec],
    sessions: &dyn SessionSource,
    parallelism: usize,
    config: &RolloutConfig,
    sink: &(dyn Fn(RolloutRecord) + Sync),
) {
    let work: Vec<(&TrialSpec, u64)> = specs
        .iter()
        .flat_map(|s| s.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.clamp(1, work.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(spec, seed)) = work.get(i) else {
                    break;
                };
                let record = match (
                    sessions.open_policy(&spec.policy_id),
                    sessions.open_world_model(),
                ) {
                    (Ok(mut policy), Ok(mut world)) => {
                        run_rollout(spec, seed, policy.as_mut(), world.as_mut(), config)
                    }
                    (Err(e), _) | (_, Err(e)) => failed_record(spec, seed, e),
                };
                sink(record);
            });
        }
    });
}
