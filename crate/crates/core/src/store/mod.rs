//! On-disk run store.
//!
//! ```text
//! <root>/runs/<run_id>/
//!     manifest.json
//!     labels.jsonl
//!     real_results.json
//!     report.json  report.csv  scatter_<method>.csv
//!     rollouts/<policy>/<task>/<trial>/
//!         initial.vframes
//!         <seed>.vframes  <seed>.json  <seed>.chunks.jsonl
//!         <seed>.outcome.json | <seed>.unlabeled.json
//! ```
//!
//! One writer per run directory. Every file is written atomically
//! (temporary file + rename).

mod agreement;
mod pipeline;
pub mod vframes;

use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{agreement, AgreementSummary, RaterSr, TrialVote};
pub use pipeline::{
    build_trial_specs, classify_run, execute_run, report_run, ClassifySummary, PipelineError,
    RunOptions, RunSummary, AUTOMATED, MANUAL,
};

use crate::frame::VideoClip;
use crate::fusion::{CachedChunkLabel, RolloutOutcome};
use crate::rollout::{
    valid_name, IterationLog, RealResult, RolloutKey, RolloutRecord, RunManifest, Termination,
};
use crate::stats::CampaignReport;
use vframes::VframesError;

/// Reserved rater id for automatic labels.
pub const CLASSIFIER_RATER: &str = "classifier";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Video(#[from] VframesError),
    #[error("run `{0}` not found")]
    RunNotFound(String),
    #[error("rollout `{0}` not found")]
    RolloutNotFound(String),
    #[error("run `{0}` already exists with a different manifest")]
    RunExists(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let n = NEXT.fetch_add(1, Ordering::Relaxed);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".{}.{n}.tmp", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    write_atomic(path, bytes).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
        path: path.to_owned(),
        source,
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), StoreError> {
    let mut bytes = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut bytes, row).expect("serializable");
        bytes.push(b'\n');
    }
    write_bytes(path, &bytes)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| StoreError::Json {
                path: path.to_owned(),
                source,
            })
        })
        .collect()
}

/// One judgement of one rollout by one rater.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub rollout_id: String,
    pub rater_id: String,
    pub outcome: bool,
    #[serde(default)]
    pub anomaly_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric_checks: Option<Vec<bool>>,
    /// Unix seconds; absent for machine labels so re-runs stay byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// Everything about a stored rollout except its frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutMeta {
    pub id: String,
    pub policy_id: String,
    pub task: String,
    pub trial: u32,
    pub seed: u64,
    pub steps_executed: usize,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub frame_count: usize,
    pub width: u32,
    pub height: u32,
    pub rate_hz: u32,
    pub action_log: Vec<IterationLog>,
}

impl RolloutMeta {
    pub fn key(&self) -> RolloutKey {
        RolloutKey {
            task: self.task.clone(),
            trial: self.trial,
            seed: self.seed,
            policy_id: self.policy_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Unlabeled {
    status: String,
    reason: String,
}

/// Per-run index entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub rollout_count: usize,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn check_key(key: &RolloutKey) -> Result<(), StoreError> {
    for part in [&key.policy_id, &key.task] {
        if !valid_name(part) {
            return Err(StoreError::InvalidName(part.clone()));
        }
    }
    Ok(())
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    fn existing_run(&self, run_id: &str) -> Result<PathBuf, StoreError> {
        let dir = self.run_dir(run_id);
        if !valid_name(run_id) || !dir.join("manifest.json").is_file() {
            return Err(StoreError::RunNotFound(run_id.to_owned()));
        }
        Ok(dir)
    }

    fn trial_dir(&self, run_id: &str, policy: &str, task: &str, trial: u32) -> PathBuf {
        self.run_dir(run_id)
            .join("rollouts")
            .join(policy)
            .join(task)
            .join(trial.to_string())
    }

    fn seed_path(&self, run_id: &str, key: &RolloutKey, suffix: &str) -> PathBuf {
        self.trial_dir(run_id, &key.policy_id, &key.task, key.trial)
            .join(format!("{}{suffix}", key.seed))
    }

    /// Creates the run directory, or accepts an existing one whose manifest is identical.
    pub fn create_run(&self, manifest: &RunManifest) -> Result<PathBuf, StoreError> {
        let dir = self.run_dir(&manifest.run_id);
        let path = dir.join("manifest.json");
        if path.is_file() {
            let existing: RunManifest = read_json(&path)?;
            if &existing != manifest {
                return Err(StoreError::RunExists(manifest.run_id.clone()));
            }
        }
        write_json(&path, manifest)?;
        Ok(dir)
    }

    pub fn manifest(&self, run_id: &str) -> Result<RunManifest, StoreError> {
        read_json(&self.existing_run(run_id)?.join("manifest.json"))
    }

    pub fn list_runs(&self) -> Result<Vec<RunInfo>, StoreError> {
        let runs = self.root.join("runs");
        let entries = match std::fs::read_dir(&runs) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&runs)(e)),
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| self.run_dir(id).join("manifest.json").is_file())
            .collect();
        ids.sort();
        ids.into_iter()
            .map(|run_id| {
                let manifest = self.manifest(&run_id)?;
                Ok(RunInfo {
                    rollout_count: self.rollout_keys(&run_id)?.len(),
                    created_at: manifest.created_at,
                    run_id,
                })
            })
            .collect()
    }

    /// Persists video, initial frame and metadata. Storing the same record
    /// twice leaves the same bytes on disk.
    pub fn store_rollout(
        &self,
        run_id: &str,
        record: &RolloutRecord,
    ) -> Result<String, StoreError> {
        self.existing_run(run_id)?;
        let key = &record.key;
        check_key(key)?;
        let trial_dir = self.trial_dir(run_id, &key.policy_id, &key.task, key.trial);
        let initial = VideoClip::from_frames(
            record.initial_frame.width(),
            record.initial_frame.height(),
            record.video.rate_hz(),
            vec![(*record.initial_frame).clone()],
        )
        .expect("single frame clip");
        vframes::write_file(&trial_dir.join("initial.vframes"), &initial)?;
        vframes::write_file(&self.seed_path(run_id, key, ".vframes"), &record.video)?;
        let meta = RolloutMeta {
            id: key.id(),
            policy_id: key.policy_id.clone(),
            task: key.task.clone(),
            trial: key.trial,
            seed: key.seed,
            steps_executed: record.steps_executed,
            termination: record.termination,
            error: record.error.clone(),
            frame_count: record.video.len(),
            width: record.video.width(),
            height: record.video.height(),
            rate_hz: record.video.rate_hz(),
            action_log: record.action_log.clone(),
        };
        write_json(&self.seed_path(run_id, key, ".json"), &meta)?;
        Ok(key.id())
    }

    /// Keys of every stored rollout in canonical order.
    pub fn rollout_keys(&self, run_id: &str) -> Result<Vec<RolloutKey>, StoreError> {
        let base = self.existing_run(run_id)?.join("rollouts");
        let mut keys = Vec::new();
        let dirs = |p: &Path| -> Result<Vec<(String, PathBuf)>, StoreError> {
            match std::fs::read_dir(p) {
                Ok(rd) => Ok(rd
                    .filter_map(|e| e.ok())
                    .filter_map(|e| Some((e.file_name().into_string().ok()?, e.path())))
                    .collect()),
                Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
                Err(e) => Err(io_err(p)(e)),
            }
        };
        for (policy_id, pdir) in dirs(&base)? {
            for (task, tdir) in dirs(&pdir)? {
                for (trial, trdir) in dirs(&tdir)? {
                    let Ok(trial) = trial.parse::<u32>() else {
                        continue;
                    };
                    for (name, _) in dirs(&trdir)? {
                        let Some(seed) = name.strip_suffix(".vframes") else {
                            continue;
                        };
                        let Ok(seed) = seed.parse::<u64>() else {
                            continue;
                        };
                        keys.push(RolloutKey {
                            task: task.clone(),
                            trial,
                            seed,
                            policy_id: policy_id.clone(),
                        });
                    }
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    fn existing_rollout(&self, run_id: &str, key: &RolloutKey) -> Result<(), StoreError> {
        check_key(key).map_err(|_| StoreError::RolloutNotFound(key.id()))?;
        if !self.seed_path(run_id, key, ".json").is_file() {
            return Err(StoreError::RolloutNotFound(key.id()));
        }
        Ok(())
    }

    pub fn rollout_meta(&self, run_id: &str, key: &RolloutKey) -> Result<RolloutMeta, StoreError> {
        self.existing_run(run_id)?;
        self.existing_rollout(run_id, key)?;
        read_json(&self.seed_path(run_id, key, ".json"))
    }

    pub fn video_path(&self, run_id: &str, key: &RolloutKey) -> Result<PathBuf, StoreError> {
        self.existing_run(run_id)?;
        self.existing_rollout(run_id, key)?;
        Ok(self.seed_path(run_id, key, ".vframes"))
    }

    pub fn load_video(&self, run_id: &str, key: &RolloutKey) -> Result<VideoClip, StoreError> {
        Ok(vframes::read_file(&self.video_path(run_id, key)?)?)
    }

    pub fn load_rollout(
        &self,
        run_id: &str,
        key: &RolloutKey,
    ) -> Result<RolloutRecord, StoreError> {
        let meta = self.rollout_meta(run_id, key)?;
        let video = self.load_video(run_id, key)?;
        let initial_path = self
            .trial_dir(run_id, &key.policy_id, &key.task, key.trial)
            .join("initial.vframes");
        let initial = vframes::read_file(&initial_path)?
            .frames()
            .first()
            .cloned()
            .ok_or_else(|| StoreError::RolloutNotFound(key.id()))?;
        Ok(RolloutRecord {
            key: meta.key(),
            initial_frame: Arc::new(initial),
            video,
            action_log: meta.action_log,
            steps_executed: meta.steps_executed,
            termination: meta.termination,
            error: meta.error,
        })
    }

    pub fn save_outcome(
        &self,
        run_id: &str,
        key: &RolloutKey,
        outcome: &RolloutOutcome,
        chunks: &[CachedChunkLabel],
    ) -> Result<(), StoreError> {
        self.existing_rollout(run_id, key)?;
        write_jsonl(&self.seed_path(run_id, key, ".chunks.jsonl"), chunks)?;
        write_json(&self.seed_path(run_id, key, ".outcome.json"), outcome)?;
        let marker = self.seed_path(run_id, key, ".unlabeled.json");
        match std::fs::remove_file(&marker) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(&marker)(e)),
            _ => Ok(()),
        }
    }

    /// Marks a rollout whose classification failed; its outcome is withheld.
    pub fn save_unlabeled(
        &self,
        run_id: &str,
        key: &RolloutKey,
        reason: &str,
    ) -> Result<(), StoreError> {
        self.existing_rollout(run_id, key)?;
        let outcome = self.seed_path(run_id, key, ".outcome.json");
        if outcome.is_file() {
            std::fs::remove_file(&outcome).map_err(io_err(&outcome))?;
        }
        let marker = Unlabeled {
            status: "UNLABELED".into(),
            reason: reason.to_owned(),
        };
        write_json(&self.seed_path(run_id, key, ".unlabeled.json"), &marker)
    }

    pub fn unlabeled_reason(
        &self,
        run_id: &str,
        key: &RolloutKey,
    ) -> Result<Option<String>, StoreError> {
        self.existing_rollout(run_id, key)?;
        let path = self.seed_path(run_id, key, ".unlabeled.json");
        if !path.is_file() {
            return Ok(None);
        }
        read_json::<Unlabeled>(&path).map(|u| Some(u.reason))
    }

    pub fn load_outcome(
        &self,
        run_id: &str,
        key: &RolloutKey,
    ) -> Result<Option<RolloutOutcome>, StoreError> {
        self.existing_rollout(run_id, key)?;
        let path = self.seed_path(run_id, key, ".outcome.json");
        if !path.is_file() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn load_chunk_cache(
        &self,
        run_id: &str,
        key: &RolloutKey,
    ) -> Result<Vec<CachedChunkLabel>, StoreError> {
        self.existing_rollout(run_id, key)?;
        read_jsonl(&self.seed_path(run_id, key, ".chunks.jsonl"))
    }

    pub fn labels(&self, run_id: &str) -> Result<Vec<LabelRecord>, StoreError> {
        read_jsonl(&self.existing_run(run_id)?.join("labels.jsonl"))
    }

    /// Validates and upserts a human label; one label per (rollout, rater).
    pub fn submit_label(&self, run_id: &str, label: LabelRecord) -> Result<(), StoreError> {
        if label.rater_id == CLASSIFIER_RATER {
            return Err(StoreError::InvalidLabel(format!(
                "rater id `{CLASSIFIER_RATER}` is reserved"
            )));
        }
        self.put_label(run_id, label)
    }

    pub(crate) fn put_label(&self, run_id: &str, label: LabelRecord) -> Result<(), StoreError> {
        self.put_labels(run_id, vec![label])
    }

    /// Upserts several labels with a single rewrite of `labels.jsonl`.
    pub(crate) fn put_labels(&self, run_id: &str, new: Vec<LabelRecord>) -> Result<(), StoreError> {
        let manifest = self.manifest(run_id)?;
        for label in &new {
            if label.rater_id.trim().is_empty() {
                return Err(StoreError::InvalidLabel(
                    "rater_id must not be empty".into(),
                ));
            }
            let key = RolloutKey::parse(&label.rollout_id)
                .ok_or_else(|| StoreError::RolloutNotFound(label.rollout_id.clone()))?;
            self.existing_rollout(run_id, &key)?;
            if let Some(checks) = &label.rubric_checks {
                let rubric_len = manifest.task(&key.task).map_or(0, |t| t.rubric.len());
                if checks.len() != rubric_len {
                    return Err(StoreError::InvalidLabel(format!(
                        "rubric_checks has {} entries, task rubric has {rubric_len}",
                        checks.len()
                    )));
                }
            }
        }
        let mut labels = self.labels(run_id)?;
        labels.retain(|l| {
            !new.iter()
                .any(|n| n.rollout_id == l.rollout_id && n.rater_id == l.rater_id)
        });
        labels.extend(new);
        labels.sort_by_cached_key(|l| (RolloutKey::parse(&l.rollout_id), l.rater_id.clone()));
        write_jsonl(&self.run_dir(run_id).join("labels.jsonl"), &labels)
    }

    /// Removes `rater`'s labels for the given rollouts.
    pub(crate) fn drop_labels(
        &self,
        run_id: &str,
        rater: &str,
        rollout_ids: &[String],
    ) -> Result<(), StoreError> {
        if rollout_ids.is_empty() {
            return Ok(());
        }
        let mut labels = self.labels(run_id)?;
        labels.retain(|l| !(l.rater_id == rater && rollout_ids.contains(&l.rollout_id)));
        write_jsonl(&self.run_dir(run_id).join("labels.jsonl"), &labels)
    }

    pub fn save_real_results(
        &self,
        run_id: &str,
        results: &[RealResult],
    ) -> Result<(), StoreError> {
        write_json(
            &self.existing_run(run_id)?.join("real_results.json"),
            &results,
        )
    }

    pub fn real_results(&self, run_id: &str) -> Result<Vec<RealResult>, StoreError> {
        let path = self.existing_run(run_id)?.join("real_results.json");
        if !path.is_file() {
            return Ok(Vec::new());
        }
        read_json(&path)
    }

    pub fn save_report(&self, run_id: &str, report: &CampaignReport) -> Result<(), StoreError> {
        let dir = self.existing_run(run_id)?;
        write_json(&dir.join("report.json"), report)?;
        write_bytes(&dir.join("report.csv"), report.to_csv().as_bytes())?;
        for m in &report.methods {
            if let Some(csv) = report.scatter_csv(&m.method) {
                write_bytes(
                    &dir.join(format!("scatter_{}.csv", m.method)),
                    csv.as_bytes(),
                )?;
            }
        }
        Ok(())
    }

    pub fn report(&self, run_id: &str) -> Result<Option<CampaignReport>, StoreError> {
        let path = self.existing_run(run_id)?.join("report.json");
        if !path.is_file() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }
}
