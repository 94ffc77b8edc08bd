//! Runner identification.
//!
//! Text reads matching a known bib label the person crop that contains them.
//! Those labeled crops form a gallery; every unlabeled person detection is
//! then scored by its average distance to the `k` nearest gallery entries and
//! rejected as an outlier when that average exceeds a threshold. The
//! threshold is picked by sweeping for the best video-wise F1, and accepted
//! inliers can seed a second, larger gallery.

mod gallery;
mod knn;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BibNumber, Detection};

pub use gallery::{l2_normalize, CropRef, Gallery, GalleryEntry};
pub use knn::{
    classify, knn_avg_distance, score_queries, vote, Classification, DistanceMetric, KnnResult,
    Neighbor, OutlierConfig, ScoredQuery,
};
pub use sweep::{
    accepted_spans, accepted_videos, parse_grid, rebuild_round2, sweep_threshold, RebuildMode,
    SweepPoint, SweepResult,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentError {
    #[error("embedding dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding has zero or non-finite norm")]
    DegenerateEmbedding,
    #[error("gallery has {size} entries, fewer than k = {k}")]
    GalleryTooSmall { size: usize, k: usize },
    #[error("detection {0} has no embedding")]
    MissingEmbedding(usize),
    #[error("invalid outlier config: {0}")]
    InvalidConfig(String),
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("invalid threshold grid {0:?}")]
    InvalidGrid(String),
    #[error("no accepted inliers to rebuild the gallery from")]
    NoInliers,
}

/// A text detection whose full text is a known bib.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRead {
    pub detection: usize,
    pub bib: BibNumber,
}

/// Keeps the text detections that read exactly as a roster bib.
pub fn filter_known_bibs(detections: &[Detection], roster: &BTreeSet<BibNumber>) -> Vec<TextRead> {
    detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_text())
        .filter_map(|(i, d)| {
            let bib = BibNumber::parse(d.text.as_deref()?).ok()?;
            roster.contains(&bib).then_some(TextRead { detection: i, bib })
        })
        .collect()
}

/// How a text box is matched to a person box in the same frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PairingRule {
    /// The person box fully contains the text box.
    #[default]
    Containment,
    /// At least `min_fraction` of the text box area lies inside the person box.
    Overlap { min_fraction: f64 },
}

impl PairingRule {
    fn accepts(&self, person: &crate::types::BBox, text: &crate::types::BBox) -> bool {
        match *self {
            PairingRule::Containment => person.contains(text),
            PairingRule::Overlap { min_fraction } => {
                let w = (person.x + person.w).min(text.x + text.w) - person.x.max(text.x);
                let h = (person.y + person.h).min(text.y + text.h) - person.y.max(text.y);
                let inter = w.max(0.0) * h.max(0.0);
                text.area() > 0.0 && inter / text.area() >= min_fraction
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryBuild {
    pub gallery: Gallery,
    pub warnings: Vec<String>,
}

/// Labels person crops with the bib read inside them.
///
/// When several person boxes qualify the smallest one wins (ties: lowest
/// detection index). Each (person detection, bib) pair appears once.
pub fn collect_gallery(
    detections: &[Detection],
    reads: &[TextRead],
    dim: usize,
    rule: PairingRule,
) -> Result<GalleryBuild, IdentError> {
    let mut persons: BTreeMap<(&str, u32), Vec<usize>> = BTreeMap::new();
    for (i, d) in detections.iter().enumerate() {
        if d.is_person() && d.bbox.is_some() {
            persons.entry((&d.video_id, d.frame)).or_default().push(i);
        }
    }

    let mut gallery = Gallery::new(dim, 1);
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for read in reads {
        let text = &detections[read.detection];
        let Some(text_box) = text.bbox else {
            warnings.push(format!(
                "text detection {} ({} frame {}) has no box, not paired",
                read.detection, text.video_id, text.frame
            ));
            continue;
        };
        let candidates = persons
            .get(&(text.video_id.as_str(), text.frame))
            .map(Vec::as_slice)
            .unwrap_or_default();
        let person = candidates
            .iter()
            .copied()
            .filter(|&p| rule.accepts(&detections[p].bbox.expect("indexed with box"), &text_box))
            .min_by(|&a, &b| {
                let area = |i: usize| detections[i].bbox.expect("indexed with box").area();
                area(a).total_cmp(&area(b)).then(a.cmp(&b))
            });
        let Some(p) = person else {
            warnings.push(format!(
                "bib {} read in {} frame {} has no surrounding person box",
                read.bib, text.video_id, text.frame
            ));
            continue;
        };
        if !seen.insert((p, read.bib.clone())) {
            continue;
        }
        let det = &detections[p];
        let emb = det.embedding.as_deref().ok_or(IdentError::MissingEmbedding(p))?;
        gallery.push(
            read.bib.clone(),
            emb,
            CropRef {
                video_id: det.video_id.clone(),
                frame: det.frame,
                detection: Some(p),
            },
        )?;
    }
    Ok(GalleryBuild { gallery, warnings })
}
