//! Run manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::task::TaskDefinition;
use crate::registry::Endpoint;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid manifest JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid manifest: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub id: String,
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointEntry {
    pub endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct OptionalEndpoint {
    #[serde(default)]
    pub endpoint: Option<String>,
}

fn default_trials() -> u32 {
    10
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_parallelism() -> usize {
    4
}
fn default_horizon() -> usize {
    super::resample::DEFAULT_HORIZON
}
fn default_timeout() -> u64 {
    120
}
fn default_frame_size() -> u32 {
    64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    pub tasks: Vec<TaskDefinition>,
    pub policies: Vec<PolicyEntry>,
    pub world_model: EndpointEntry,
    #[serde(default)]
    pub classifier: OptionalEndpoint,
    #[serde(default = "default_trials")]
    pub trials_per_task: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: PathBuf,
    /// World-model prediction horizon in 10 Hz steps.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Real-robot results CSV; when set, trials and initial frames come from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_results: Option<PathBuf>,
    /// Layout seed for synthetic initial frames when no real results are given.
    #[serde(default)]
    pub layout_seed: u64,
    #[serde(default = "default_frame_size")]
    pub frame_width: u32,
    #[serde(default = "default_frame_size")]
    pub frame_height: u32,
}

pub(crate) fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && s != "."
        && s != ".."
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.to_owned(),
            source,
        })?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let bad = |m: String| Err(ManifestError::Invalid(m));
        if !valid_name(&self.run_id) {
            return bad(format!("run_id `{}` must be [A-Za-z0-9_.-]+", self.run_id));
        }
        if self.tasks.is_empty() || self.policies.is_empty() {
            return bad("at least one task and one policy are required".into());
        }
        for t in &self.tasks {
            if !valid_name(&t.name) {
                return bad(format!("task name `{}` must be [A-Za-z0-9_.-]+", t.name));
            }
            if t.step_limit == 0 {
                return bad(format!("task `{}` has step_limit 0", t.name));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.policies {
            if !valid_name(&p.id) {
                return bad(format!("policy id `{}` must be [A-Za-z0-9_.-]+", p.id));
            }
            if !ids.insert(&p.id) {
                return bad(format!("duplicate policy id `{}`", p.id));
            }
            Endpoint::parse(&p.endpoint).map_err(ManifestError::Invalid)?;
        }
        Endpoint::parse(&self.world_model.endpoint).map_err(ManifestError::Invalid)?;
        if let Some(e) = &self.classifier.endpoint {
            Endpoint::parse(e).map_err(ManifestError::Invalid)?;
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let distinct: std::collections::BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        Ok(())
    }

    pub fn task(&self, name: &str) -> Option<&TaskDefinition> {
        self.tasks.iter().find(|t| t.name == name)
    }
}
