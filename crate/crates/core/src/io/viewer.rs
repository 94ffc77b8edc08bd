use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geojson::{parse_track, track_feature, trajectories, FeatureCollection, TrajectoryProperties};
use super::{read_json, read_to_string, write_json, IoError, SCHEMA_VERSION};
use crate::dataset::Dataset;
use crate::geo::interpolate_position;
use crate::metrics::gt_spans;
use crate::pipeline::{text_spans, FuseResult, VARIANT_REID1, VARIANT_REID2};
use crate::timeline::{Provenance, RunnerTimeline};
use crate::track::Track;
use crate::types::{BibNumber, FrameInterval, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub camera_id: u32,
    pub video_ids: Vec<String>,
    /// Median snapped position over the camera's filtered fixes.
    pub position: Option<[f64; 2]>,
    pub arc_pos_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewerWaypoint {
    pub t_ms: i64,
    pub arc_pos_m: f64,
    pub position: [f64; 2],
    pub provenance: Provenance,
}

/// One runner in one video: detected, text-read and true frame spans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub video_id: String,
    pub camera_id: u32,
    pub det: Option<FrameInterval>,
    pub text: Option<FrameInterval>,
    pub gt: Option<FrameInterval>,
    /// Identification stage that produced `det`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerEntry {
    pub bib: BibNumber,
    pub finish_duration_s: Option<f64>,
    pub waypoints: Vec<ViewerWaypoint>,
    /// `[t_ms, lon, lat]`, ascending in time.
    pub samples: Vec<[f64; 3]>,
    pub strips: Vec<Strip>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewerBundle {
    pub schema_version: u32,
    pub name: String,
    pub start_ms: Option<i64>,
    pub end_ms: Option<i64>,
    pub sample_interval_ms: i64,
    pub track_length_m: f64,
    pub cameras: Vec<CameraEntry>,
    pub camera_trajectories: FeatureCollection<TrajectoryProperties>,
    pub runners: Vec<RunnerEntry>,
}

fn sample_times(tl: &RunnerTimeline, interval_ms: i64) -> Vec<Timestamp> {
    let (Some(first), Some(last)) = (tl.waypoints.first(), tl.waypoints.last()) else {
        return Vec::new();
    };
    let (a, b) = (first.timestamp.millis(), last.timestamp.millis());
    // a grid shared by all runners, plus every waypoint time
    let mut ts: BTreeSet<i64> = tl.waypoints.iter().map(|w| w.timestamp.millis()).collect();
    let mut t = a.div_euclid(interval_ms) * interval_ms;
    while t <= b {
        if t >= a {
            ts.insert(t);
        }
        t += interval_ms;
    }
    ts.into_iter().map(Timestamp::from_millis).collect()
}

fn runner_samples(
    tl: &RunnerTimeline,
    track: &Track,
    interval_ms: i64,
) -> Result<Vec<[f64; 3]>, crate::Error> {
    let wps = tl.arc_waypoints();
    if wps.len() == 1 {
        let p = track.point_at(wps[0].arc_pos_m);
        return Ok(vec![[wps[0].timestamp.millis() as f64, p.lon(), p.lat()]]);
    }
    sample_times(tl, interval_ms)
        .into_iter()
        .map(|t| {
            let p = interpolate_position(&wps, t, track)?;
            Ok([t.millis() as f64, p.lon(), p.lat()])
        })
        .collect()
}

impl ViewerBundle {
    /// Assembles the bundle from a fused dataset, one entry per runner with a
    /// timeline. Positions are sampled every `sample_interval_s` and at each
    /// waypoint.
    pub fn build(
        ds: &Dataset,
        fused: &FuseResult,
        sample_interval_s: f64,
    ) -> Result<Self, crate::Error> {
        let interval_ms = (sample_interval_s * 1000.0).round() as i64;
        if interval_ms <= 0 {
            return Err(crate::Error::Config(format!(
                "sample interval {sample_interval_s} s must be at least 1 ms"
            )));
        }
        let track = &ds.track;

        let mut per_camera: BTreeMap<u32, (Vec<String>, Vec<f64>)> = BTreeMap::new();
        for v in &ds.videos {
            let e = per_camera.entry(v.camera_id).or_default();
            e.0.push(v.video_id.clone());
            if let Some(t) = fused.traces.get(&v.video_id) {
                e.1.extend(t.fixes.iter().map(|f| f.snap.arc_pos_m));
            }
        }
        let cameras = per_camera
            .into_iter()
            .map(|(camera_id, (mut video_ids, mut arcs))| {
                video_ids.sort();
                arcs.sort_by(f64::total_cmp);
                let arc = arcs.get(arcs.len() / 2).copied();
                CameraEntry {
                    camera_id,
                    video_ids,
                    position: arc.map(|a| track.point_at(a).to_lon_lat()),
                    arc_pos_m: arc,
                }
            })
            .collect();

        let final_round = fused.final_round();
        let det = final_round.map(|r| r.spans(ds)).unwrap_or_default();
        let source = match final_round.map(|r| r.round) {
            Some(2) => VARIANT_REID2,
            _ => VARIANT_REID1,
        };
        let text = text_spans(ds, &fused.reads);
        let gt = gt_spans(&ds.ground_truth);
        let camera_of: BTreeMap<&str, u32> = ds
            .videos
            .iter()
            .map(|v| (v.video_id.as_str(), v.camera_id))
            .collect();
        let timelines: BTreeMap<&BibNumber, &RunnerTimeline> =
            fused.timelines.iter().map(|t| (&t.bib, t)).collect();

        let mut runners = Vec::with_capacity(timelines.len());
        let (mut start_ms, mut end_ms) = (None::<i64>, None::<i64>);
        for (bib, tl) in &timelines {
            let bib = *bib;
            let mut videos: BTreeSet<&String> = BTreeSet::new();
            for spans in [&det, &text, &gt] {
                if let Some(m) = spans.get(bib) {
                    videos.extend(m.keys());
                }
            }
            let get = |spans: &crate::metrics::DetectionSpans, v: &String| {
                spans.get(bib).and_then(|m| m.get(v)).copied()
            };
            let strips = videos
                .into_iter()
                .map(|v| Strip {
                    video_id: v.clone(),
                    camera_id: camera_of.get(v.as_str()).copied().unwrap_or_default(),
                    det: get(&det, v),
                    text: get(&text, v),
                    gt: get(&gt, v),
                    source: source.to_owned(),
                })
                .collect();

            let waypoints = tl
                .waypoints
                .iter()
                .map(|w| ViewerWaypoint {
                    t_ms: w.timestamp.millis(),
                    arc_pos_m: w.arc_pos_m,
                    position: track.point_at(w.arc_pos_m).to_lon_lat(),
                    provenance: w.provenance.clone(),
                })
                .collect();
            let samples = runner_samples(tl, track, interval_ms)?;
            if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
                let (a, b) = (first[0] as i64, last[0] as i64);
                start_ms = Some(start_ms.map_or(a, |s| s.min(a)));
                end_ms = Some(end_ms.map_or(b, |e| e.max(b)));
            }
            runners.push(RunnerEntry {
                bib: bib.clone(),
                finish_duration_s: ds.finish_times.get(bib).copied(),
                waypoints,
                samples,
                strips,
            });
        }

        Ok(ViewerBundle {
            schema_version: SCHEMA_VERSION,
            name: ds.name.clone(),
            start_ms,
            end_ms,
            sample_interval_ms: interval_ms,
            track_length_m: track.total_length_m(),
            cameras,
            camera_trajectories: trajectories(&ds.videos, &fused.traces),
            runners,
        })
    }
}

/// Writes `race.json` and `track.geojson` into `dir`.
pub fn export_viewer_bundle(dir: &Path, bundle: &ViewerBundle, track: &Track) -> Result<(), IoError> {
    write_json(&dir.join("track.geojson"), &track_feature(track, &bundle.name))?;
    write_json(&dir.join("race.json"), bundle)
}

pub fn load_viewer_bundle(dir: &Path) -> Result<(ViewerBundle, Track), IoError> {
    let race = dir.join("race.json");
    let bundle: ViewerBundle = read_json(&race)?;
    if bundle.schema_version != SCHEMA_VERSION {
        return Err(IoError::schema(
            &race,
            format!("unsupported schema version {}", bundle.schema_version),
        ));
    }
    let track_path = dir.join("track.geojson");
    let track = parse_track(&track_path, &read_to_string(&track_path)?)?;
    Ok((bundle, track))
}
