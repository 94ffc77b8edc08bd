//! Runner timestamps from video metadata and per-runner waypoint timelines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BibNumber, GeoPoint, Timestamp, VideoMeta};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimelineError {
    #[error("frame {frame} outside video {video_id} (0..{frame_count})")]
    FrameOutOfRange {
        video_id: String,
        frame: u32,
        frame_count: u32,
    },
    #[error("no frames given")]
    NoFrames,
    #[error("finish duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("sighting for bib {found} in timeline of bib {expected}")]
    MixedBibs {
        expected: BibNumber,
        found: BibNumber,
    },
}

/// Absolute time of frame `f`: recording start (`last_modified - duration`)
/// plus `f / fps`, rounded half up to the millisecond.
pub fn runner_timestamp(meta: &VideoMeta, frame: u32) -> Result<Timestamp, TimelineError> {
    if !meta.contains_frame(frame) {
        return Err(TimelineError::FrameOutOfRange {
            video_id: meta.video_id.clone(),
            frame,
            frame_count: meta.frame_count(),
        });
    }
    Ok(meta.start().add_millis(frame_offset_ms(frame, meta)))
}

/// `round_half_up(frame * 1000 * den / num)` in exact integer arithmetic.
fn frame_offset_ms(frame: u32, meta: &VideoMeta) -> i64 {
    let num = meta.fps.num() as i128;
    let den = meta.fps.den() as i128;
    let scaled = 2 * frame as i128 * 1000 * den + num;
    (scaled.div_euclid(2 * num)) as i64
}

/// The runner is closest to the camera in the last frame they appear in.
pub fn best_frame(frames: &[u32]) -> Result<u32, TimelineError> {
    frames.iter().copied().max().ok_or(TimelineError::NoFrames)
}

/// Race start guessed from the first camera: seconds zeroed.
pub fn infer_start_time(first_camera_ts: Timestamp) -> Timestamp {
    Timestamp::from_millis(first_camera_ts.millis().div_euclid(60_000) * 60_000)
}

/// Finish line waypoint: start plus the official finish duration.
pub fn finish_waypoint(
    start: Timestamp,
    finish_duration_s: f64,
    track_length_m: f64,
) -> Result<TimelineWaypoint, TimelineError> {
    if !(finish_duration_s > 0.0 && finish_duration_s.is_finite()) {
        return Err(TimelineError::NonPositiveDuration(finish_duration_s));
    }
    Ok(TimelineWaypoint {
        timestamp: start.add_millis((finish_duration_s * 1000.0).round() as i64),
        arc_pos_m: track_length_m,
        provenance: Provenance::Finish,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SightingSource {
    Text,
    Reid,
    Sim,
}

/// One runner observation resolved to an absolute time and course position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerSighting {
    pub bib: BibNumber,
    pub video_id: String,
    pub camera_id: u32,
    pub frame: u32,
    pub timestamp: Timestamp,
    pub camera_point: GeoPoint,
    pub arc_pos_m: f64,
    pub source: SightingSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Start,
    Camera {
        video_id: String,
        camera_id: u32,
        frame: u32,
        source: SightingSource,
    },
    Finish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineWaypoint {
    pub timestamp: Timestamp,
    pub arc_pos_m: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerTimeline {
    pub bib: BibNumber,
    pub waypoints: Vec<TimelineWaypoint>,
    pub finish_duration_s: Option<f64>,
}

impl RunnerTimeline {
    pub fn arc_waypoints(&self) -> Vec<crate::geo::ArcWaypoint> {
        self.waypoints
            .iter()
            .map(|w| crate::geo::ArcWaypoint {
                timestamp: w.timestamp,
                arc_pos_m: w.arc_pos_m,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    /// Camera placed a few meters after the start line. Only runners whose
    /// first waypoint comes from it get an inferred start waypoint.
    pub start_camera: Option<u32>,
    /// Sightings at one camera further apart than this are separate passes.
    pub pass_gap_s: f64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        Self {
            start_camera: None,
            pass_gap_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineBuild {
    pub timeline: RunnerTimeline,
    pub warnings: Vec<String>,
}

/// Builds one runner's timeline.
///
/// Sightings collapse to one waypoint per camera pass (the last sighting of
/// the pass). Waypoints must advance along the course as time advances; the
/// longest chain that does so is kept and every other waypoint is dropped
/// with a warning. A start waypoint is prepended when the first kept waypoint
/// comes from the configured start camera, and a finish waypoint is appended
/// when both the start and the finish duration are known.
pub fn build_timeline(
    bib: &BibNumber,
    sightings: &[RunnerSighting],
    finish_duration_s: Option<f64>,
    track_length_m: f64,
    cfg: &TimelineConfig,
) -> Result<TimelineBuild, TimelineError> {
    if let Some(s) = sightings.iter().find(|s| &s.bib != bib) {
        return Err(TimelineError::MixedBibs {
            expected: bib.clone(),
            found: s.bib.clone(),
        });
    }
    let mut warnings = Vec::new();

    let mut by_camera: BTreeMap<u32, Vec<&RunnerSighting>> = BTreeMap::new();
    for s in sightings {
        by_camera.entry(s.camera_id).or_default().push(s);
    }
    let gap_ms = (cfg.pass_gap_s * 1000.0).round() as i64;
    let mut passes: Vec<&RunnerSighting> = Vec::new();
    for list in by_camera.values_mut() {
        list.sort_by(|a, b| {
            (a.timestamp, a.frame, &a.video_id).cmp(&(b.timestamp, b.frame, &b.video_id))
        });
        let mut last_of_pass = list[0];
        for s in &list[1..] {
            if s.timestamp.millis() - last_of_pass.timestamp.millis() > gap_ms {
                passes.push(last_of_pass);
            }
            last_of_pass = s;
        }
        passes.push(last_of_pass);
    }

    // course order, then keep the longest run with strictly increasing time
    passes.sort_by(|a, b| {
        a.arc_pos_m
            .total_cmp(&b.arc_pos_m)
            .then(a.camera_id.cmp(&b.camera_id))
            .then(a.timestamp.cmp(&b.timestamp))
    });
    let keep = longest_increasing(&passes.iter().map(|s| s.timestamp).collect::<Vec<_>>());
    let mut waypoints = Vec::with_capacity(keep.len() + 2);
    for (i, s) in passes.iter().enumerate() {
        if keep.binary_search(&i).is_err() {
            warnings.push(format!(
                "bib {bib}: dropped camera {} sighting at {} (out of course order)",
                s.camera_id, s.timestamp
            ));
            continue;
        }
        waypoints.push(TimelineWaypoint {
            timestamp: s.timestamp,
            arc_pos_m: s.arc_pos_m,
            provenance: Provenance::Camera {
                video_id: s.video_id.clone(),
                camera_id: s.camera_id,
                frame: s.frame,
                source: s.source,
            },
        });
    }

    let first_camera = waypoints.first().and_then(|w| match w.provenance {
        Provenance::Camera { camera_id, .. } => Some(camera_id),
        _ => None,
    });
    let mut start = None;
    if let (Some(start_cam), Some(first_cam)) = (cfg.start_camera, first_camera) {
        if start_cam == first_cam {
            let ts = infer_start_time(waypoints[0].timestamp);
            if ts < waypoints[0].timestamp {
                start = Some(ts);
                waypoints.insert(
                    0,
                    TimelineWaypoint {
                        timestamp: ts,
                        arc_pos_m: 0.0,
                        provenance: Provenance::Start,
                    },
                );
            } else {
                warnings.push(format!(
                    "bib {bib}: first sighting on a whole minute, start not inferred"
                ));
            }
        }
    }

    match (finish_duration_s, start) {
        (Some(d), Some(start)) => match finish_waypoint(start, d, track_length_m) {
            Ok(fin) if fin.timestamp > waypoints.last().expect("start present").timestamp => {
                waypoints.push(fin)
            }
            Ok(fin) => warnings.push(format!(
                "bib {bib}: finish at {} precedes last sighting, dropped",
                fin.timestamp
            )),
            Err(e) => warnings.push(format!("bib {bib}: {e}")),
        },
        (Some(_), None) if !waypoints.is_empty() => warnings.push(format!(
            "bib {bib}: finish time known but start not inferred, finish omitted"
        )),
        (None, _) if !waypoints.is_empty() => {
            warnings.push(format!("bib {bib}: no finish time"))
        }
        _ => {}
    }

    Ok(TimelineBuild {
        timeline: RunnerTimeline {
            bib: bib.clone(),
            waypoints,
            finish_duration_s,
        },
        warnings,
    })
}

/// Indices of a longest strictly increasing subsequence (ascending).
fn longest_increasing(values: &[Timestamp]) -> Vec<usize> {
    // tails[k]: index of the smallest tail of an increasing run of length k+1
    let mut tails: Vec<usize> = Vec::new();
    let mut prev: Vec<Option<usize>> = vec![None; values.len()];
    for (i, v) in values.iter().enumerate() {
        let k = tails.partition_point(|&j| values[j] < *v);
        prev[i] = k.checked_sub(1).map(|p| tails[p]);
        if k == tails.len() {
            tails.push(i);
        } else {
            tails[k] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        out.push(i);
        cur = prev[i];
    }
    out.reverse();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FrameRate;

    fn meta(last_modified_ms: i64, duration_ms: i64, fps: FrameRate) -> VideoMeta {
        VideoMeta::new("v", 1, Timestamp::from_millis(last_modified_ms), duration_ms, fps, vec![])
            .unwrap()
    }

    // 16:00:00 on an arbitrary day, in ms
    const H16: i64 = 1_569_772_800_000;

    fn bib(s: &str) -> BibNumber {
        BibNumber::parse(s).unwrap()
    }

    fn sighting(camera_id: u32, frame: u32, ts: i64, arc: f64) -> RunnerSighting {
        RunnerSighting {
            bib: bib("156"),
            video_id: format!("cam{camera_id}"),
            camera_id,
            frame,
            timestamp: Timestamp::from_millis(ts),
            camera_point: GeoPoint::new(52.0, 4.0).unwrap(),
            arc_pos_m: arc,
            source: SightingSource::Text,
        }
    }

    #[test]
    fn frame_zero_is_video_start() {
        let m = meta(H16 + 35_440, 35_440, FrameRate::integer(30));
        assert_eq!(runner_timestamp(&m, 0).unwrap(), Timestamp::from_millis(H16));
    }

    #[test]
    fn frame_600_at_30fps_is_20s_in() {
        let m = meta(H16 + 40_000, 40_000, FrameRate::integer(30));
        assert_eq!(
            runner_timestamp(&m, 600).unwrap(),
            Timestamp::from_millis(H16 + 20_000)
        );
    }

    #[test]
    fn timestamp_rounds_half_up() {
        // 1 frame at 2000 fps = 0.5 ms
        let m = meta(H16 + 1000, 1000, FrameRate::integer(2000));
        assert_eq!(runner_timestamp(&m, 1).unwrap(), Timestamp::from_millis(H16 + 1));
        // 1 frame at 30 fps = 33.33 ms, 2 frames = 66.67 ms
        let m = meta(H16 + 1000, 1000, FrameRate::integer(30));
        assert_eq!(runner_timestamp(&m, 1).unwrap(), Timestamp::from_millis(H16 + 33));
        assert_eq!(runner_timestamp(&m, 2).unwrap(), Timestamp::from_millis(H16 + 67));
    }

    #[test]
    fn timestamp_rejects_out_of_range_frame() {
        let m = meta(H16 + 35_440, 35_440, FrameRate::integer(30));
        assert!(runner_timestamp(&m, 1063).is_ok());
        assert!(matches!(
            runner_timestamp(&m, 1064),
            Err(TimelineError::FrameOutOfRange { frame_count: 1064, .. })
        ));
    }

    #[test]
    fn best_frame_is_last_appearance() {
        let frames: Vec<u32> = (98..=232).collect();
        assert_eq!(best_frame(&frames).unwrap(), 232);
        assert_eq!(best_frame(&[96]).unwrap(), 96);
        assert_eq!(best_frame(&[]), Err(TimelineError::NoFrames));
    }

    #[test]
    fn start_time_zeroes_seconds() {
        let t = |ms| Timestamp::from_millis(ms);
        assert_eq!(infer_start_time(t(H16 + 10_000)), t(H16));
        assert_eq!(infer_start_time(t(H16)), t(H16));
        assert_eq!(infer_start_time(t(H16 - 1)), t(H16 - 60_000));
    }

    #[test]
    fn finish_waypoint_adds_duration() {
        let w = finish_waypoint(Timestamp::from_millis(H16), 1500.0, 5000.0).unwrap();
        assert_eq!(w.timestamp, Timestamp::from_millis(H16 + 1_500_000));
        assert_eq!(w.arc_pos_m, 5000.0);
        assert_eq!(w.provenance, Provenance::Finish);
        assert!(finish_waypoint(Timestamp::from_millis(H16), 0.0, 5000.0).is_err());
    }

    #[test]
    fn single_sighting_gets_start_only() {
        let cfg = TimelineConfig {
            start_camera: Some(1),
            ..Default::default()
        };
        let s = [sighting(1, 300, H16 + 10_000, 15.0)];
        let b = build_timeline(&bib("156"), &s, None, 5000.0, &cfg).unwrap();
        let wps = &b.timeline.waypoints;
        assert_eq!(wps.len(), 2);
        assert_eq!(wps[0].provenance, Provenance::Start);
        assert_eq!(wps[0].timestamp, Timestamp::from_millis(H16));
        assert_eq!(b.warnings.len(), 1);
    }

    #[test]
    fn duplicate_sightings_collapse_to_last_frame() {
        let cfg = TimelineConfig::default();
        let s: Vec<_> = (0..5)
            .map(|i| sighting(3, 100 + i, H16 + 100_000 + 33 * i as i64, 1000.0))
            .collect();
        let b = build_timeline(&bib("156"), &s, None, 5000.0, &cfg).unwrap();
        assert_eq!(b.timeline.waypoints.len(), 1);
        assert!(matches!(
            b.timeline.waypoints[0].provenance,
            Provenance::Camera { frame: 104, .. }
        ));
    }

    #[test]
    fn separate_passes_at_one_camera() {
        let cfg = TimelineConfig::default();
        let s = [
            sighting(2, 10, H16 + 60_000, 500.0),
            sighting(2, 20, H16 + 61_000, 500.0),
            sighting(2, 9000, H16 + 400_000, 500.0),
        ];
        let b = build_timeline(&bib("156"), &s, None, 5000.0, &cfg).unwrap();
        let frames: Vec<_> = b
            .timeline
            .waypoints
            .iter()
            .map(|w| match w.provenance {
                Provenance::Camera { frame, .. } => frame,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(frames, vec![20, 9000]);
    }

    #[test]
    fn out_of_order_camera_dropped_with_warning() {
        let cfg = TimelineConfig {
            start_camera: Some(1),
            ..Default::default()
        };
        let s = [
            sighting(1, 1, H16 + 5_000, 15.0),
            sighting(2, 1, H16 + 300_000, 1000.0),
            // camera 3 claims the runner before camera 2: false positive
            sighting(3, 1, H16 + 100_000, 2000.0),
            sighting(4, 1, H16 + 900_000, 3000.0),
        ];
        let b = build_timeline(&bib("156"), &s, Some(1200.0), 5000.0, &cfg).unwrap();
        let ts: Vec<_> = b.timeline.waypoints.iter().map(|w| w.timestamp.millis()).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        // start, 3 of the 4 cameras, finish
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), H16 + 1_200_000);
        assert!(b.warnings.iter().any(|w| w.contains("out of course order")));
    }

    #[test]
    fn empty_sightings_give_empty_timeline() {
        let b = build_timeline(&bib("8"), &[], Some(100.0), 5000.0, &TimelineConfig::default())
            .unwrap();
        assert!(b.timeline.waypoints.is_empty());
    }

    #[test]
    fn mixed_bibs_rejected() {
        let s = [sighting(1, 1, H16, 0.0)];
        assert!(matches!(
            build_timeline(&bib("8"), &s, None, 1.0, &TimelineConfig::default()),
            Err(TimelineError::MixedBibs { .. })
        ));
    }

    #[test]
    fn lis_picks_longest_chain() {
        let t = |v: &[i64]| v.iter().map(|x| Timestamp::from_millis(*x)).collect::<Vec<_>>();
        assert_eq!(longest_increasing(&t(&[1, 2, 3])), vec![0, 1, 2]);
        assert_eq!(longest_increasing(&t(&[1, 9, 2, 3])), vec![0, 2, 3]);
        assert_eq!(longest_increasing(&t(&[5, 5, 5])).len(), 1);
        assert!(longest_increasing(&[]).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn timestamp_monotone_in_frame(
            dur in 1_000i64..100_000,
            num in 1u64..240_000,
            den in 1u64..1002,
        ) {
            // at most 1000 fps, so consecutive frames are >= 1 ms apart
            proptest::prop_assume!(num <= 1000 * den);
            let m = meta(H16 + dur, dur, FrameRate::new(num, den).unwrap());
            let n = m.frame_count().min(500);
            let ts: Vec<_> = (0..n).map(|f| runner_timestamp(&m, f).unwrap()).collect();
            proptest::prop_assert!(ts.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn timeline_strictly_increasing(
            raw in proptest::collection::vec((1u32..10, 0i64..2_000_000), 0..40)
        ) {
            let s: Vec<_> = raw
                .iter()
                .map(|(cam, ts)| sighting(*cam, 1, H16 + 1 + ts, *cam as f64 * 500.0))
                .collect();
            let cfg = TimelineConfig { start_camera: Some(1), pass_gap_s: 10.0 };
            let b = build_timeline(&bib("156"), &s, Some(2500.0), 5000.0, &cfg).unwrap();
            let wps = &b.timeline.waypoints;
            proptest::prop_assert!(wps.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
            proptest::prop_assert!(wps.windows(2).all(|w| w[0].arc_pos_m <= w[1].arc_pos_m));
        }
    }
}
