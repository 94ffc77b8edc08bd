use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gallery::{CropRef, Gallery};
use super::knn::{Classification, ScoredQuery};
use super::IdentError;
use crate::metrics::{spans_from_frames, video_f1, DetectionSpans, VideoSets};
use crate::types::Detection;

/// Parses `start:stop:step` into an inclusive grid. Values are rounded to
/// 1e-9 so that e.g. `0:1:0.1` yields exactly `0.3`, not `0.30000000000000004`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, IdentError> {
    let bad = || IdentError::InvalidGrid(text.to_owned());
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Bib → videos over the queries accepted at `threshold`.
pub fn accepted_videos(
    scored: &[ScoredQuery],
    detections: &[Detection],
    threshold: f64,
) -> VideoSets {
    let mut out = VideoSets::new();
    for q in scored.iter().filter(|q| q.accepted_at(threshold)) {
        out.entry(q.voted_bib.clone())
            .or_default()
            .insert(detections[q.detection].video_id.clone());
    }
    out
}

/// Bib → video → first/last accepted frame at `threshold`.
pub fn accepted_spans(
    scored: &[ScoredQuery],
    detections: &[Detection],
    threshold: f64,
) -> DetectionSpans {
    spans_from_frames(scored.iter().filter(|q| q.accepted_at(threshold)).map(|q| {
        let d = &detections[q.detection];
        (q.voted_bib.clone(), d.video_id.clone(), d.frame)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub macro_f1: f64,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_threshold: f64,
    pub best_macro_f1: f64,
    pub curve: Vec<SweepPoint>,
}

/// Evaluates video-wise macro F1 at each threshold and returns the best
/// (ties go to the smaller threshold) together with the whole curve.
pub fn sweep_threshold(
    scored: &[ScoredQuery],
    detections: &[Detection],
    gt: &VideoSets,
    grid: &[f64],
) -> Result<SweepResult, IdentError> {
    if grid.is_empty() {
        return Err(IdentError::EmptyGrid);
    }
    let curve: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&threshold| SweepPoint {
            threshold,
            macro_f1: video_f1(&accepted_videos(scored, detections, threshold), gt).macro_f1,
            accepted: scored.iter().filter(|q| q.accepted_at(threshold)).count(),
        })
        .collect();
    let best = curve
        .iter()
        .min_by(|a, b| {
            b.macro_f1
                .total_cmp(&a.macro_f1)
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .expect("non-empty grid");
    Ok(SweepResult {
        best_threshold: best.threshold,
        best_macro_f1: best.macro_f1,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebuildMode {
    /// Round-1 gallery plus accepted inliers.
    #[default]
    Merge,
    /// Accepted inliers only.
    InliersOnly,
}

/// Second-round gallery from accepted first-round classifications, each
/// labeled with its predicted bib. Detections already in the round-1
/// gallery keep their text label.
pub fn rebuild_round2(
    round1: &Gallery,
    classifications: &[Classification],
    detections: &[Detection],
    mode: RebuildMode,
) -> Result<Gallery, IdentError> {
    let accepted: Vec<&Classification> = classifications.iter().filter(|c| c.accepted).collect();
    if accepted.is_empty() {
        return Err(IdentError::NoInliers);
    }
    let mut out = match mode {
        RebuildMode::Merge => round1.clone().with_round(2),
        RebuildMode::InliersOnly => Gallery::new(round1.dim(), 2),
    };
    for c in accepted {
        if mode == RebuildMode::Merge && round1.contains_detection(c.detection) {
            continue;
        }
        let det = &detections[c.detection];
        let emb = det
            .embedding
            .as_deref()
            .ok_or(IdentError::MissingEmbedding(c.detection))?;
        let bib = c.predicted_bib.clone().expect("accepted implies a label");
        out.push(
            bib,
            emb,
            CropRef {
                video_id: det.video_id.clone(),
                frame: det.frame,
                detection: Some(c.detection),
            },
        )?;
    }
    Ok(out)
}
