use std::collections::{BTreeMap, BTreeSet};

use crate::sim::SimOutput;
use crate::track::Track;
use crate::types::{BibNumber, Detection, GeoPoint, GroundTruthEntry, VideoMeta};
use crate::validate::{validate_dataset, ValidationReport};

/// Manual GPS corrections: video id → raw trace index → point.
pub type Overrides = BTreeMap<String, BTreeMap<usize, GeoPoint>>;

/// Everything the pipeline consumes, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub embedding_dim: usize,
    pub start_camera: Option<u32>,
    pub videos: Vec<VideoMeta>,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<GroundTruthEntry>,
    pub roster: BTreeSet<BibNumber>,
    /// Official finish durations in seconds.
    pub finish_times: BTreeMap<BibNumber, f64>,
    pub track: Track,
    pub overrides: Overrides,
}

impl Dataset {
    pub fn from_sim(name: impl Into<String>, out: SimOutput) -> Self {
        let w = out.world;
        Self {
            name: name.into(),
            embedding_dim: w.runners.first().map_or(0, |r| r.prototype.len()),
            start_camera: Some(w.start_camera),
            roster: w.roster(),
            finish_times: w.finish_times(),
            videos: w.videos,
            detections: out.detections,
            ground_truth: w.ground_truth,
            track: w.track,
            overrides: Overrides::new(),
        }
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoMeta> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_dataset(
            &self.videos,
            &self.detections,
            &self.ground_truth,
            Some(self.embedding_dim),
        )
    }
}
