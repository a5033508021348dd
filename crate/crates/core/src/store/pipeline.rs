//! Run, classify and report over a [`RunStore`].

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::agreement::{agreement, success_rates};
use super::{LabelRecord, RunStore, StoreError, CLASSIFIER_RATER};
use crate::backend::BackendError;
use crate::frame::Frame;
use crate::fusion::{classify_video, FusionError, Outcome, OutcomeCause, RolloutOutcome};
use crate::mock::{fnv1a, initial_layout, sandbox_render};
use crate::protocol::{Hello, Role};
use crate::registry::{BackendRegistry, RegistrySessions};
use crate::rollout::{
    ingest_real_results, load_frame, run_campaign_with, RealResult, RolloutConfig, RolloutKey,
    RunManifest, TrialSpec,
};
use crate::stats::{campaign_report, success_rate, CampaignReport, SrEntry};

pub const AUTOMATED: &str = "automated";
pub const MANUAL: &str = "manual";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Re-classify rollouts that already have an outcome.
    pub force_classify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub rollouts: usize,
    pub failed: usize,
    pub classified: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub classified: usize,
    /// Rollout ids whose classification failed; their outcomes are withheld.
    pub unlabeled: Vec<String>,
}

fn synthetic_frame(manifest: &RunManifest, task: &str, trial: u32) -> Frame {
    let seed = fnv1a(&[
        &manifest.layout_seed.to_be_bytes(),
        task.as_bytes(),
        &trial.to_be_bytes(),
    ]);
    sandbox_render(
        &initial_layout(seed),
        manifest.frame_width,
        manifest.frame_height,
    )
}

/// Expands the manifest into one spec per (task, trial, policy).
///
/// With real results, trials and initial frames come from the results table
/// (rows for tasks or policies absent from the manifest are skipped);
/// otherwise `trials_per_task` synthetic sandbox layouts are used, shared by
/// all policies.
pub fn build_trial_specs(
    manifest: &RunManifest,
    real: Option<&[RealResult]>,
) -> Result<Vec<TrialSpec>, PipelineError> {
    let mut specs = Vec::new();
    match real {
        Some(rows) => {
            let mut frames: BTreeMap<&Path, Arc<Frame>> = BTreeMap::new();
            for row in rows {
                let Some(task) = manifest.task(&row.task) else {
                    continue;
                };
                if !manifest.policies.iter().any(|p| p.id == row.policy_id) {
                    continue;
                }
                let frame = match frames.get(row.initial_frame_path.as_path()) {
                    Some(f) => f.clone(),
                    None => {
                        let f = Arc::new(
                            load_frame(&row.initial_frame_path)
                                .map_err(|e| PipelineError::Input(e.to_string()))?,
                        );
                        frames.insert(&row.initial_frame_path, f.clone());
                        f
                    }
                };
                specs.push(TrialSpec {
                    task: task.clone(),
                    trial_index: row.trial,
                    initial_frame: frame,
                    seeds: manifest.seeds.clone(),
                    policy_id: row.policy_id.clone(),
                });
            }
        }
        None => {
            for task in &manifest.tasks {
                for trial in 0..manifest.trials_per_task {
                    let frame = Arc::new(synthetic_frame(manifest, &task.name, trial));
                    for p in &manifest.policies {
                        specs.push(TrialSpec {
                            task: task.clone(),
                            trial_index: trial,
                            initial_frame: frame.clone(),
                            seeds: manifest.seeds.clone(),
                            policy_id: p.id.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(specs)
}

/// Executes a manifest end to end: rollouts, storage and (when a classifier
/// is configured) automatic labelling. Relative paths in the manifest resolve
/// against `base_dir`.
pub fn execute_run(
    store: &RunStore,
    manifest: &RunManifest,
    registry: &BackendRegistry,
    base_dir: &Path,
    options: &RunOptions,
) -> Result<RunSummary, PipelineError> {
    manifest
        .validate()
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    store.create_run(manifest)?;
    let real = match &manifest.real_results {
        Some(path) => {
            let rows = ingest_real_results(&base_dir.join(path))
                .map_err(|e| PipelineError::Input(e.to_string()))?;
            store.save_real_results(&manifest.run_id, &rows)?;
            Some(rows)
        }
        None => None,
    };
    let specs = build_trial_specs(manifest, real.as_deref())?;
    let (w, h) = specs
        .first()
        .map(|s| s.initial_frame.dims())
        .unwrap_or((manifest.frame_width, manifest.frame_height));
    let sessions = RegistrySessions {
        registry,
        policies: manifest
            .policies
            .iter()
            .map(|p| (p.id.clone(), p.endpoint.clone()))
            .collect(),
        world_model: manifest.world_model.endpoint.clone(),
        tasks: manifest.tasks.iter().map(|t| t.name.clone()).collect(),
        frame_size: (w, h),
    };
    let config = RolloutConfig {
        horizon: manifest.horizon,
        ..RolloutConfig::default()
    };
    let stored = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let first_error: Mutex<Option<StoreError>> = Mutex::new(None);
    run_campaign_with(
        &specs,
        &sessions,
        manifest.parallelism,
        &config,
        &|record| {
            if record.error.is_some() {
                failed.fetch_add(1, Ordering::Relaxed);
            }
            match store.store_rollout(&manifest.run_id, &record) {
                Ok(_) => {
                    stored.fetch_add(1, Ordering::Relaxed);
                }
                Err(e) => {
                    first_error.lock().unwrap().get_or_insert(e);
                }
            }
        },
    );
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e.into());
    }
    let classified = match &manifest.classifier.endpoint {
        Some(_) => classify_run(store, &manifest.run_id, registry, options.force_classify)?,
        None => ClassifySummary::default(),
    };
    Ok(RunSummary {
        run_id: manifest.run_id.clone(),
        rollouts: stored.into_inner(),
        failed: failed.into_inner(),
        classified: classified.classified,
        unlabeled: classified.unlabeled.len(),
    })
}

/// Labels every stored rollout with the run's classifier and records the
/// fused outcome as a `classifier` label.
///
/// A classifier failure on one rollout marks that rollout UNLABELED, drops
/// any previous classifier label for it, and moves on with a fresh session.
pub fn classify_run(
    store: &RunStore,
    run_id: &str,
    registry: &BackendRegistry,
    force: bool,
) -> Result<ClassifySummary, PipelineError> {
    let manifest = store.manifest(run_id)?;
    let endpoint = manifest.classifier.endpoint.clone().ok_or_else(|| {
        PipelineError::Input(format!("run `{run_id}` has no classifier endpoint"))
    })?;
    let keys = store.rollout_keys(run_id)?;
    let hello = Hello::new(
        Role::Classifier,
        manifest.tasks.iter().map(|t| t.name.clone()).collect(),
        manifest.frame_width,
        manifest.frame_height,
    );
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(RolloutKey, RolloutOutcome)>> = Mutex::new(Vec::new());
    let unlabeled: Mutex<Vec<RolloutKey>> = Mutex::new(Vec::new());
    let first_error: Mutex<Option<PipelineError>> = Mutex::new(None);
    let workers = manifest.parallelism.clamp(1, keys.len().max(1));
    let open = || registry.open_classifier(&endpoint, &hello);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let fail = |e: PipelineError| {
                    first_error.lock().unwrap().get_or_insert(e);
                };
                let mut classifier = match open() {
                    Ok(c) => c,
                    Err(e) => return fail(e.into()),
                };
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(key) = keys.get(i) else { break };
                    let mut work = || -> Result<Option<RolloutOutcome>, PipelineError> {
                        if !force {
                            if let Some(o) = store.load_outcome(run_id, key)? {
                                return Ok(Some(o));
                            }
                        }
                        let video = store.load_video(run_id, key)?;
                        if video.is_empty() {
                            let none = RolloutOutcome {
                                outcome: Outcome::Failure,
                                cause: OutcomeCause::NoSuccess,
                                chunk_labels: vec![],
                            };
                            store.save_outcome(run_id, key, &none, &[])?;
                            return Ok(Some(none));
                        }
                        let classified = classifier
                            .reset()
                            .map_err(|source| FusionError::Classifier {
                                span_index: 0,
                                source,
                            })
                            .and_then(|_| {
                                classify_video(video.frames(), classifier.as_mut(), &key.task)
                            });
                        match classified {
                            Ok((outcome, chunks)) => {
                                store.save_outcome(run_id, key, &outcome, &chunks)?;
                                Ok(Some(outcome))
                            }
                            Err(e) => {
                                store.save_unlabeled(run_id, key, &e.to_string())?;
                                Ok(None)
                            }
                        }
                    };
                    match work() {
                        Ok(Some(o)) => results.lock().unwrap().push((key.clone(), o)),
                        Ok(None) => {
                            unlabeled.lock().unwrap().push(key.clone());
                            classifier = match open() {
                                Ok(c) => c,
                                Err(e) => return fail(e.into()),
                            };
                        }
                        Err(e) => return fail(e),
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let results = results.into_inner().unwrap();
    let mut unlabeled = unlabeled.into_inner().unwrap();
    unlabeled.sort();
    let labels: Vec<LabelRecord> = results
        .iter()
        .map(|(key, o)| LabelRecord {
            rollout_id: key.id(),
            rater_id: CLASSIFIER_RATER.to_owned(),
            outcome: o.is_success(),
            anomaly_flag: o.cause == OutcomeCause::AnomalyFirst,
            rubric_checks: None,
            timestamp: None,
        })
        .collect();
    store.drop_labels(
        run_id,
        CLASSIFIER_RATER,
        &unlabeled.iter().map(RolloutKey::id).collect::<Vec<_>>(),
    )?;
    store.put_labels(run_id, labels)?;
    Ok(ClassifySummary {
        classified: results.len(),
        unlabeled: unlabeled.iter().map(RolloutKey::id).collect(),
    })
}

fn entries(rates: BTreeMap<(String, String), (f64, usize)>) -> Vec<SrEntry> {
    rates
        .into_iter()
        .map(|((policy_id, task), (sr, _))| SrEntry {
            policy_id,
            task,
            sr,
        })
        .collect()
}

/// Builds and saves the campaign report from stored labels and real results.
pub fn report_run(store: &RunStore, run_id: &str) -> Result<CampaignReport, PipelineError> {
    let labels = store.labels(run_id)?;
    let keyed: Vec<(RolloutKey, &LabelRecord)> = labels
        .iter()
        .filter_map(|l| Some((RolloutKey::parse(&l.rollout_id)?, l)))
        .collect();
    let automated = success_rates(
        keyed
            .iter()
            .filter(|(_, l)| l.rater_id == CLASSIFIER_RATER)
            .map(|(k, l)| (k, l.outcome)),
    );
    let manual = success_rates(
        keyed
            .iter()
            .filter(|(_, l)| l.rater_id != CLASSIFIER_RATER)
            .map(|(k, l)| (k, l.outcome)),
    );
    let mut methods = Vec::new();
    if !automated.is_empty() {
        methods.push((AUTOMATED.to_owned(), entries(automated)));
    }
    if !manual.is_empty() {
        methods.push((MANUAL.to_owned(), entries(manual)));
    }

    let mut real: BTreeMap<(String, String), Vec<bool>> = BTreeMap::new();
    for r in store.real_results(run_id)? {
        real.entry((r.policy_id, r.task))
            .or_default()
            .push(r.outcome);
    }
    let real: Vec<SrEntry> = real
        .into_iter()
        .map(|((policy_id, task), v)| SrEntry {
            policy_id,
            task,
            sr: success_rate(&v).expect("non-empty"),
        })
        .collect();

    let report = campaign_report(&methods, &real, agreement(&labels).icc);
    store.save_report(run_id, &report)?;
    Ok(report)
}
