//! Video-wise precision/recall/F1, temporal IoU, and the two baselines.
//!
//! Scores are fractions in `[0, 1]`; reports multiply by 100.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::types::{BibNumber, FrameInterval, GroundTruthEntry, VideoMeta};

/// Bib → videos the runner appears (or is predicted) in.
pub type VideoSets = BTreeMap<BibNumber, BTreeSet<String>>;
/// Bib → video → frame span.
pub type DetectionSpans = BTreeMap<BibNumber, BTreeMap<String, FrameInterval>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoWiseScore {
    pub bib: BibNumber,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub gt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoF1 {
    pub per_runner: Vec<VideoWiseScore>,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Scores each ground-truth runner; detected bibs absent from `gt` are ignored.
pub fn video_f1(detected: &VideoSets, gt: &VideoSets) -> VideoF1 {
    let empty = BTreeSet::new();
    let per_runner: Vec<VideoWiseScore> = gt
        .iter()
        .map(|(bib, truth)| {
            let det = detected.get(bib).unwrap_or(&empty);
            let tp = det.intersection(truth).count();
            let fp = det.len() - tp;
            let recall = ratio(tp, truth.len());
            let precision = ratio(tp, tp + fp);
            let f1 = if recall + precision > 0.0 {
                2.0 * recall * precision / (recall + precision)
            } else {
                0.0
            };
            VideoWiseScore {
                bib: bib.clone(),
                recall,
                precision,
                f1,
                tp,
                fp,
                gt_count: truth.len(),
            }
        })
        .collect();
    VideoF1 {
        macro_recall: mean(per_runner.iter().map(|s| s.recall)),
        macro_precision: mean(per_runner.iter().map(|s| s.precision)),
        macro_f1: mean(per_runner.iter().map(|s| s.f1)),
        per_runner,
    }
}

/// One-dimensional IoU of two inclusive frame spans, measured on widths
/// `end - start`. Two identical zero-width spans score 1.
pub fn interval_iou(det: FrameInterval, gt: FrameInterval) -> f64 {
    let overlap = i64::from(gt.end().min(det.end())) - i64::from(gt.start().max(det.start()));
    if overlap < 0 {
        return 0.0;
    }
    let width = |i: FrameInterval| i64::from(i.end()) - i64::from(i.start());
    let union = width(gt) + width(det) - overlap;
    if union == 0 {
        1.0
    } else {
        overlap as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoIou {
    pub video_id: String,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalIoUScore {
    pub bib: BibNumber,
    pub per_video: Vec<VideoIou>,
    pub mean_iou: f64,
    pub n_videos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalIou {
    pub per_runner: Vec<TemporalIoUScore>,
    pub miou: f64,
}

/// Collapses `(bib, video, frame)` observations into one span per
/// (bib, video), from the first to the last frame.
pub fn spans_from_frames(
    frames: impl IntoIterator<Item = (BibNumber, String, u32)>,
) -> DetectionSpans {
    let mut out = DetectionSpans::new();
    for (bib, video, frame) in frames {
        let point = FrameInterval::new(frame, frame).expect("start == end");
        out.entry(bib)
            .or_default()
            .entry(video)
            .and_modify(|i| *i = i.cover(point))
            .or_insert(point);
    }
    out
}

/// Ground-truth spans; several rows for one (bib, video) merge into their cover.
pub fn gt_spans(gt: &[GroundTruthEntry]) -> DetectionSpans {
    let mut out = DetectionSpans::new();
    for e in gt {
        out.entry(e.bib.clone())
            .or_default()
            .entry(e.video_id.clone())
            .and_modify(|i| *i = i.cover(e.interval))
            .or_insert(e.interval);
    }
    out
}

pub fn gt_video_sets(gt: &[GroundTruthEntry]) -> VideoSets {
    let mut out = VideoSets::new();
    for e in gt {
        out.entry(e.bib.clone()).or_default().insert(e.video_id.clone());
    }
    out
}

pub fn video_sets(spans: &DetectionSpans) -> VideoSets {
    spans
        .iter()
        .map(|(bib, videos)| (bib.clone(), videos.keys().cloned().collect()))
        .collect()
}

/// Per-runner mean IoU over the videos the runner was retrieved in, then
/// the mean over ground-truth runners. Retrieval in a video the runner is
/// not in scores 0 there.
pub fn temporal_iou(detections: &DetectionSpans, gt: &[GroundTruthEntry]) -> TemporalIou {
    let truth = gt_spans(gt);
    let no_videos = BTreeMap::new();
    let per_runner: Vec<TemporalIoUScore> = truth
        .iter()
        .map(|(bib, gt_videos)| {
            let per_video: Vec<VideoIou> = detections
                .get(bib)
                .unwrap_or(&no_videos)
                .iter()
                .map(|(video_id, &det)| VideoIou {
                    video_id: video_id.clone(),
                    iou: gt_videos.get(video_id).map_or(0.0, |&g| interval_iou(det, g)),
                })
                .collect();
            TemporalIoUScore {
                bib: bib.clone(),
                mean_iou: mean(per_video.iter().map(|v| v.iou)),
                n_videos: per_video.len(),
                per_video,
            }
        })
        .collect();
    TemporalIou {
        miou: mean(per_runner.iter().map(|r| r.mean_iou)),
        per_runner,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    /// Number of ground-truth runners averaged over.
    pub m: usize,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub miou: f64,
    pub video: Vec<VideoWiseScore>,
    pub iou: Vec<TemporalIoUScore>,
}

/// Scores predicted spans against ground truth.
pub fn evaluate(variant: &str, detections: &DetectionSpans, gt: &[GroundTruthEntry]) -> EvalReport {
    let f1 = video_f1(&video_sets(detections), &gt_video_sets(gt));
    let iou = temporal_iou(detections, gt);
    EvalReport {
        variant: variant.to_owned(),
        m: f1.per_runner.len(),
        macro_recall: f1.macro_recall,
        macro_precision: f1.macro_precision,
        macro_f1: f1.macro_f1,
        miou: iou.miou,
        video: f1.per_runner,
        iou: iou.per_runner,
    }
}

fn full_span(v: &VideoMeta) -> FrameInterval {
    FrameInterval::new(0, v.frame_count().saturating_sub(1)).expect("0 <= end")
}

/// Every roster bib in every video over the whole video.
pub fn baseline_all(
    videos: &[VideoMeta],
    roster: &BTreeSet<BibNumber>,
    gt: &[GroundTruthEntry],
) -> EvalReport {
    let mut spans = DetectionSpans::new();
    for bib in roster {
        let per_video = spans.entry(bib.clone()).or_default();
        for v in videos {
            per_video.insert(v.video_id.clone(), full_span(v));
        }
    }
    evaluate("base-all", &spans, gt)
}

/// For each video, a uniform random roster subset as large as the number of
/// runners truly in it, predicted over the whole video.
pub fn baseline_random(
    videos: &[VideoMeta],
    roster: &BTreeSet<BibNumber>,
    gt: &[GroundTruthEntry],
    seed: u64,
) -> EvalReport {
    let mut visible: BTreeMap<&str, BTreeSet<&BibNumber>> = BTreeMap::new();
    for e in gt {
        visible.entry(&e.video_id).or_default().insert(&e.bib);
    }
    let roster: Vec<&BibNumber> = roster.iter().collect();
    let mut ordered: Vec<&VideoMeta> = videos.iter().collect();
    ordered.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spans = DetectionSpans::new();
    for v in ordered {
        let n_v = visible.get(v.video_id.as_str()).map_or(0, BTreeSet::len);
        let n = n_v.min(roster.len());
        let mut picked = sample(&mut rng, roster.len(), n).into_vec();
        picked.sort_unstable();
        for i in picked {
            spans
                .entry(roster[i].clone())
                .or_default()
                .insert(v.video_id.clone(), full_span(v));
        }
    }
    evaluate("base-rand", &spans, gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bib(s: &str) -> BibNumber {
        BibNumber::parse(s).unwrap()
    }

    fn iv(s: u32, e: u32) -> FrameInterval {
        FrameInterval::new(s, e).unwrap()
    }

    fn sets(pairs: &[(&str, &[&str])]) -> VideoSets {
        pairs
            .iter()
            .map(|(b, vs)| (bib(b), vs.iter().map(|v| v.to_string()).collect()))
            .collect()
    }

    #[test]
    fn hand_case_two_of_three() {
        let r = video_f1(&sets(&[("8", &["A", "B", "D"])]), &sets(&[("8", &["A", "B", "C"])]));
        let s = &r.per_runner[0];
        assert_eq!((s.tp, s.fp, s.gt_count), (2, 1, 3));
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn undetected_runner_scores_zero_and_counts() {
        let gt = sets(&[("8", &["A"]), ("9", &["B"])]);
        let r = video_f1(&sets(&[("8", &["A"])]), &gt);
        assert_eq!(r.per_runner[1].precision, 0.0);
        assert_eq!(r.per_runner[1].f1, 0.0);
        assert_eq!(r.macro_f1, 0.5);
        assert_eq!(video_f1(&VideoSets::new(), &gt).macro_f1, 0.0);
        assert_eq!(video_f1(&gt, &gt).macro_f1, 1.0);
    }

    #[test]
    fn iou_cases() {
        assert_eq!(interval_iou(iv(98, 232), iv(96, 248)), 134.0 / 152.0);
        assert_eq!(interval_iou(iv(5, 9), iv(5, 9)), 1.0);
        assert_eq!(interval_iou(iv(7, 7), iv(7, 7)), 1.0);
        assert_eq!(interval_iou(iv(0, 4), iv(6, 9)), 0.0);
        // touching at one frame: zero width overlap
        assert_eq!(interval_iou(iv(0, 5), iv(5, 9)), 0.0);
    }

    #[test]
    fn irrelevant_video_scores_zero() {
        let gt = vec![GroundTruthEntry {
            video_id: "A".into(),
            bib: bib("8"),
            interval: iv(0, 10),
        }];
        let mut det = DetectionSpans::new();
        det.entry(bib("8")).or_default().insert("A".into(), iv(0, 10));
        assert_eq!(temporal_iou(&det, &gt).miou, 1.0);
        det.entry(bib("8")).or_default().insert("B".into(), iv(0, 10));
        let r = temporal_iou(&det, &gt);
        assert_eq!(r.per_runner[0].n_videos, 2);
        assert_eq!(r.miou, 0.5);
        assert_eq!(temporal_iou(&DetectionSpans::new(), &gt).miou, 0.0);
    }

    #[test]
    fn spans_cover_first_to_last() {
        let s = spans_from_frames([
            (bib("8"), "A".to_string(), 40),
            (bib("8"), "A".to_string(), 3),
            (bib("8"), "A".to_string(), 17),
        ]);
        assert_eq!(s[&bib("8")]["A"], iv(3, 40));
    }

    fn arb_iv() -> impl Strategy<Value = FrameInterval> {
        (0u32..500, 0u32..200).prop_map(|(s, w)| iv(s, s + w))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_iv(), b in arb_iv()) {
            let x = interval_iou(a, b);
            prop_assert_eq!(x, interval_iou(b, a));
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn f1_bounded_by_min_side(
            det in proptest::collection::btree_set(0u8..12, 0..12),
            truth in proptest::collection::btree_set(0u8..12, 1..12),
        ) {
            let to = |s: &BTreeSet<u8>| -> BTreeSet<String> { s.iter().map(|v| v.to_string()).collect() };
            let d = VideoSets::from([(bib("1"), to(&det))]);
            let g = VideoSets::from([(bib("1"), to(&truth))]);
            let s = video_f1(&d, &g).per_runner.remove(0);
            for x in [s.recall, s.precision, s.f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert!(s.f1 <= 2.0 * s.recall.min(s.precision) + 1e-12);
            prop_assert!(s.tp <= s.gt_count);
        }

        #[test]
        fn irrelevant_detection_never_helps(
            truth in proptest::collection::btree_set(0u8..8, 1..8),
            det in proptest::collection::btree_set(0u8..8, 0..8),
            span in arb_iv(),
        ) {
            let gt: Vec<GroundTruthEntry> = truth
                .iter()
                .map(|v| GroundTruthEntry { video_id: v.to_string(), bib: bib("1"), interval: span })
                .collect();
            let mut spans = DetectionSpans::new();
            for v in &det {
                spans.entry(bib("1")).or_default().insert(v.to_string(), span);
            }
            let before = evaluate("x", &spans, &gt);
            spans.entry(bib("1")).or_default().insert("irrelevant".into(), span);
            let after = evaluate("x", &spans, &gt);
            prop_assert!(after.miou <= before.miou);
            prop_assert!(after.macro_precision <= before.macro_precision);
        }
    }
}
