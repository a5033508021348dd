//! Chunked rollout classification.
//!
//! A rollout video is cut into overlapping fixed-length chunks, each chunk is
//! labelled SUCCESS, ANOMALY or DEFAULT, and the first non-DEFAULT label in
//! time order decides the rollout outcome.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChunkClassifier};
use crate::frame::Frame;

pub const CHUNK_LEN: usize = 32;
pub const CHUNK_OVERLAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChunkClass {
    Success,
    Anomaly,
    Default,
}

/// Half-open frame spans, ordered by start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    pub spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkLabel {
    pub span_index: usize,
    pub label: ChunkClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeCause {
    SuccessFirst,
    AnomalyFirst,
    NoSuccess,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub outcome: Outcome,
    pub cause: OutcomeCause,
    pub chunk_labels: Vec<ChunkLabel>,
}

impl RolloutOutcome {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

/// One line of the per-rollout chunk-label cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedChunkLabel {
    pub span: [usize; 2],
    pub label: ChunkClass,
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no chunk labels to fuse")]
    NoLabels,
    #[error("video has no frames")]
    EmptyVideo,
    #[error("classifier failed on span {span_index}: {source}")]
    Classifier {
        span_index: usize,
        source: BackendError,
    },
}

/// Plans `chunk`-frame spans with at least `overlap` frames shared between
/// neighbours. Regular spans start every `chunk - overlap` frames; if they
/// leave a tail uncovered, one extra span is anchored at the end of the video.
/// Videos shorter than `chunk` get a single `(0, video_len)` span.
pub fn plan_chunks(video_len: usize, chunk: usize, overlap: usize) -> ChunkPlan {
    assert!(chunk > overlap, "chunk length must exceed overlap");
    if video_len == 0 {
        return ChunkPlan { spans: vec![] };
    }
    if video_len <= chunk {
        return ChunkPlan {
            spans: vec![(0, video_len)],
        };
    }
    let stride = chunk - overlap;
    let mut spans = Vec::new();
    let mut start = 0;
    while start + chunk <= video_len {
        spans.push((start, start + chunk));
        start += stride;
    }
    if spans.last().is_some_and(|&(_, end)| end < video_len) {
        spans.push((video_len - chunk, video_len));
    }
    ChunkPlan { spans }
}

/// The first non-DEFAULT label decides the outcome.
pub fn fuse_labels(labels: &[ChunkLabel]) -> Result<RolloutOutcome, FusionError> {
    if labels.is_empty() {
        return Err(FusionError::NoLabels);
    }
    let first = labels.iter().find(|l| l.label != ChunkClass::Default);
    let (outcome, cause) = match first.map(|l| l.label) {
        Some(ChunkClass::Success) => (Outcome::Success, OutcomeCause::SuccessFirst),
        Some(ChunkClass::Anomaly) => (Outcome::Failure, OutcomeCause::AnomalyFirst),
        _ => (Outcome::Failure, OutcomeCause::NoSuccess),
    };
    Ok(RolloutOutcome {
        outcome,
        cause,
        chunk_labels: labels.to_vec(),
    })
}

/// Frames of one span, padded to `len` by repeating the last frame.
pub fn chunk_frames(video: &[Frame], span: (usize, usize), len: usize) -> Vec<Frame> {
    let mut frames: Vec<Frame> = video[span.0..span.1].to_vec();
    if let Some(last) = frames.last().cloned() {
        frames.resize(len.max(frames.len()), last);
    }
    frames
}

/// Classifies every planned chunk in order and fuses the labels.
///
/// Returns the outcome together with the cache lines for the chunk labels.
pub fn classify_video(
    video: &[Frame],
    classifier: &mut dyn ChunkClassifier,
    task_name: &str,
) -> Result<(RolloutOutcome, Vec<CachedChunkLabel>), FusionError> {
    if video.is_empty() {
        return Err(FusionError::EmptyVideo);
    }
    let plan = plan_chunks(video.len(), CHUNK_LEN, CHUNK_OVERLAP);
    let mut labels = Vec::with_capacity(plan.spans.len());
    let mut cache = Vec::with_capacity(plan.spans.len());
    for (span_index, &span) in plan.spans.iter().enumerate() {
        let frames = chunk_frames(video, span, CHUNK_LEN);
        let label = classifier
            .classify_chunk(&frames, task_name)
            .map_err(|source| FusionError::Classifier { span_index, source })?;
        labels.push(ChunkLabel { span_index, label });
        cache.push(CachedChunkLabel {
            span: [span.0, span.1],
            label,
        });
    }
    Ok((fuse_labels(&labels)?, cache))
}
