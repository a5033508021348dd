//! Ingestion of real-robot outcome tables.
//!
//! CSV header: `policy_id,task,trial,outcome,initial_frame_path`. Relative
//! frame paths resolve against the CSV's directory. Frames may be PNG images
//! or `.vframes` containers (first frame is used).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::store::vframes;

pub const CSV_HEADER: [&str; 5] = [
    "policy_id",
    "task",
    "trial",
    "outcome",
    "initial_frame_path",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealResult {
    pub policy_id: String,
    pub task: String,
    pub trial: u32,
    pub outcome: bool,
    pub initial_frame_path: PathBuf,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("header must be `{}`, found `{found}`", CSV_HEADER.join(","))]
    Header { found: String },
    #[error("{} offending row(s):\n{}", .0.len(), .0.join("\n"))]
    Rows(Vec<String>),
}

#[derive(Debug, Error)]
pub enum FrameLoadError {
    #[error("frame image {path} not found")]
    Missing { path: PathBuf },
    #[error("cannot decode frame {path}: {message}")]
    Decode { path: PathBuf, message: String },
}

fn parse_outcome(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "success" | "true" | "1" => Some(true),
        "failure" | "fail" | "false" | "0" => Some(false),
        _ => None,
    }
}

/// Parses and checks a real-results CSV. Every row problem is collected and
/// reported together, with line numbers.
pub fn ingest_real_results(path: &Path) -> Result<Vec<RealResult>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Read {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_real_results(&text, base)
}

pub fn parse_real_results(text: &str, base: &Path) -> Result<Vec<RealResult>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::Header {
            found: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(IngestError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut problems = Vec::new();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        if row.len() != CSV_HEADER.len() {
            problems.push(format!(
                "line {line}: expected {} fields, found {}",
                CSV_HEADER.len(),
                row.len()
            ));
            continue;
        }
        let (policy_id, task) = (row[0].to_owned(), row[1].to_owned());
        if policy_id.is_empty() || task.is_empty() {
            problems.push(format!("line {line}: empty policy_id or task"));
            continue;
        }
        let Ok(trial) = row[2].parse::<u32>() else {
            problems.push(format!(
                "line {line}: trial `{}` is not an integer",
                &row[2]
            ));
            continue;
        };
        let Some(outcome) = parse_outcome(&row[3]) else {
            problems.push(format!(
                "line {line}: outcome `{}` is not success/failure",
                &row[3]
            ));
            continue;
        };
        let frame_path = base.join(&row[4]);
        if !frame_path.is_file() {
            problems.push(format!(
                "line {line}: initial frame {} does not exist",
                frame_path.display()
            ));
            continue;
        }
        if !seen.insert((policy_id.clone(), task.clone(), trial)) {
            problems.push(format!(
                "line {line}: duplicate row for ({policy_id}, {task}, {trial})"
            ));
            continue;
        }
        out.push(RealResult {
            policy_id,
            task,
            trial,
            outcome,
            initial_frame_path: frame_path,
        });
    }
    if !problems.is_empty() {
        return Err(IngestError::Rows(problems));
    }
    Ok(out)
}

/// Loads an initial frame from a PNG (any colour type, converted to RGB8) or a `.vframes` file.
pub fn load_frame(path: &Path) -> Result<Frame, FrameLoadError> {
    if !path.is_file() {
        return Err(FrameLoadError::Missing {
            path: path.to_owned(),
        });
    }
    let decode = |message: String| FrameLoadError::Decode {
        path: path.to_owned(),
        message,
    };
    if path.extension().is_some_and(|e| e == "vframes") {
        let clip = vframes::read_file(path).map_err(|e| decode(e.to_string()))?;
        return clip
            .frames()
            .first()
            .cloned()
            .ok_or_else(|| decode("container has no frames".into()));
    }
    let img = image::open(path)
        .map_err(|e| decode(e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Frame::new(w, h, img.into_raw()).map_err(|e| decode(e.to_string()))
}
