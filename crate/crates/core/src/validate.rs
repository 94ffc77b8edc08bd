//! Cross-record consistency checks for a loaded dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{Detection, DetectionKind, GroundTruthEntry, VideoMeta};

/// Which input record a violation refers to (index within its list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordRef {
    Video(usize),
    Detection(usize),
    GroundTruth(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateVideo { record: RecordRef, video_id: String },
    InvalidVideo { record: RecordRef, reason: String },
    UnknownVideo { record: RecordRef, video_id: String },
    FrameOutOfRange { record: RecordRef, frame: u32, frame_count: u32 },
    MissingText { record: RecordRef },
    MissingEmbedding { record: RecordRef },
    DimensionMismatch { record: RecordRef, expected: usize, found: usize },
    NonFiniteEmbedding { record: RecordRef },
    ConfidenceOutOfRange { record: RecordRef, confidence: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVideo { record, video_id } => {
                write!(f, "{record:?}: duplicate video id {video_id:?}")
            }
            Violation::InvalidVideo { record, reason } => write!(f, "{record:?}: {reason}"),
            Violation::UnknownVideo { record, video_id } => {
                write!(f, "{record:?}: unknown video id {video_id:?}")
            }
            Violation::FrameOutOfRange {
                record,
                frame,
                frame_count,
            } => write!(
                f,
                "{record:?}: frame {frame} outside 0..{frame_count}"
            ),
            Violation::MissingText { record } => write!(f, "{record:?}: text detection without text"),
            Violation::MissingEmbedding { record } => {
                write!(f, "{record:?}: person detection without embedding")
            }
            Violation::DimensionMismatch {
                record,
                expected,
                found,
            } => write!(
                f,
                "{record:?}: embedding dimension {found}, expected {expected}"
            ),
            Violation::NonFiniteEmbedding { record } => {
                write!(f, "{record:?}: embedding has non-finite values")
            }
            Violation::ConfidenceOutOfRange { record, confidence } => {
                write!(f, "{record:?}: confidence {confidence} outside [0, 1]")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects every invariant violation across videos, detections and ground
/// truth. When `embedding_dim` is `None` the first person embedding sets it.
pub fn validate_dataset(
    videos: &[VideoMeta],
    detections: &[Detection],
    gt: &[GroundTruthEntry],
    embedding_dim: Option<usize>,
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut frame_counts: BTreeMap<&str, u32> = BTreeMap::new();
    let mut seen = BTreeSet::new();

    for (i, v) in videos.iter().enumerate() {
        let record = RecordRef::Video(i);
        if !seen.insert(v.video_id.as_str()) {
            violations.push(Violation::DuplicateVideo {
                record,
                video_id: v.video_id.clone(),
            });
            continue;
        }
        if let Some(reason) = v.invariant_violation() {
            violations.push(Violation::InvalidVideo { record, reason });
        }
        frame_counts.insert(&v.video_id, v.frame_count());
    }

    let check_frame = |record: RecordRef, video_id: &str, frame: u32, out: &mut Vec<Violation>| {
        match frame_counts.get(video_id) {
            None => out.push(Violation::UnknownVideo {
                record,
                video_id: video_id.to_owned(),
            }),
            Some(&n) if frame >= n => out.push(Violation::FrameOutOfRange {
                record,
                frame,
                frame_count: n,
            }),
            Some(_) => {}
        }
    };

    let mut dim = embedding_dim;
    for (i, d) in detections.iter().enumerate() {
        let record = RecordRef::Detection(i);
        check_frame(record, &d.video_id, d.frame, &mut violations);
        if !(0.0..=1.0).contains(&d.confidence) {
            violations.push(Violation::ConfidenceOutOfRange {
                record,
                confidence: d.confidence,
            });
        }
        match d.kind {
            DetectionKind::Text => {
                if d.text.is_none() {
                    violations.push(Violation::MissingText { record });
                }
            }
            DetectionKind::Person => match &d.embedding {
                None => violations.push(Violation::MissingEmbedding { record }),
                Some(e) => {
                    let expected = *dim.get_or_insert(e.len());
                    if e.len() != expected || e.is_empty() {
                        violations.push(Violation::DimensionMismatch {
                            record,
                            expected,
                            found: e.len(),
                        });
                    } else if e.iter().any(|x| !x.is_finite()) {
                        violations.push(Violation::NonFiniteEmbedding { record });
                    }
                }
            },
        }
    }

    for (i, g) in gt.iter().enumerate() {
        let record = RecordRef::GroundTruth(i);
        check_frame(record, &g.video_id, g.interval.end(), &mut violations);
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BibNumber, FrameInterval, FrameRate, Timestamp};

    fn video(id: &str) -> VideoMeta {
        VideoMeta::new(
            id,
            1,
            Timestamp::from_millis(1_000_000),
            35_440,
            FrameRate::integer(30),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn consistent_dataset_is_clean() {
        let videos = vec![video("v1")];
        let dets = vec![
            Detection::text("v1", 1063, "405", 0.9, None),
            Detection::person("v1", 0, 1.0, None, vec![1.0, 0.0]),
        ];
        let gt = vec![GroundTruthEntry {
            video_id: "v1".into(),
            bib: BibNumber::parse("405").unwrap(),
            interval: FrameInterval::new(98, 232).unwrap(),
        }];
        assert!(validate_dataset(&videos, &dets, &gt, Some(2)).is_empty());
    }

    #[test]
    fn frame_beyond_video_length() {
        let videos = vec![video("v1")];
        let dets = vec![Detection::text("v1", 10_000, "8", 0.5, None)];
        let report = validate_dataset(&videos, &dets, &[], None);
        assert_eq!(
            report.violations,
            vec![Violation::FrameOutOfRange {
                record: RecordRef::Detection(0),
                frame: 10_000,
                frame_count: 1064
            }]
        );
    }

    #[test]
    fn dangling_ground_truth_video() {
        let gt = vec![GroundTruthEntry {
            video_id: "nope".into(),
            bib: BibNumber::parse("8").unwrap(),
            interval: FrameInterval::new(0, 1).unwrap(),
        }];
        let report = validate_dataset(&[video("v1")], &[], &gt, None);
        assert!(matches!(
            report.violations.as_slice(),
            [Violation::UnknownVideo { record: RecordRef::GroundTruth(0), .. }]
        ));
    }

    #[test]
    fn embedding_dimension_and_duplicates() {
        let videos = vec![video("v1"), video("v1")];
        let dets = vec![
            Detection::person("v1", 0, 1.0, None, vec![1.0, 0.0]),
            Detection::person("v1", 0, 1.0, None, vec![1.0, 0.0, 0.0]),
            Detection {
                embedding: None,
                ..Detection::person("v1", 0, 1.0, None, vec![])
            },
            Detection {
                text: None,
                ..Detection::text("v1", 0, "1", 2.0, None)
            },
        ];
        let report = validate_dataset(&videos, &dets, &[], None);
        assert_eq!(report.violations.len(), 5, "{:?}", report.violations);
        assert!(matches!(report.violations[0], Violation::DuplicateVideo { .. }));
        assert!(matches!(
            report.violations[1],
            Violation::DimensionMismatch { expected: 2, found: 3, .. }
        ));
        assert!(matches!(report.violations[2], Violation::MissingEmbedding { .. }));
        assert!(matches!(report.violations[3], Violation::ConfidenceOutOfRange { .. }));
        assert!(matches!(report.violations[4], Violation::MissingText { .. }));
    }
}
