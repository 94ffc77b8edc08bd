//! Deterministic synthetic race.
//!
//! Runners start together and move at constant speed along the course.
//! Each camera sits at a fixed course position and records from before the
//! first runner arrives until after the last one leaves, as one video or as
//! several clips with pauses in between. A runner is visible for `fov_s` seconds
//! up to the moment they pass the camera; the bib becomes readable in the
//! later part of that window. Person embeddings are noisy copies of a
//! per-runner prototype, and pedestrians without bibs add distractors.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::ident::l2_normalize;
use crate::track::{LocalProjection, Track, TrackError};
use crate::types::{
    round_sig9, BBox, BibNumber, Detection, FrameInterval, FrameRate, GeoPoint, GpsFix,
    GroundTruthEntry, Timestamp, TypeError, VideoMeta,
};

/// 2019-09-29T16:00:00Z.
pub const DEFAULT_START_MS: i64 = 1_569_772_800_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_runners: usize,
    pub n_cameras: usize,
    /// Course polyline; `None` generates a meandering course of `course_length_m`.
    pub track: Option<Vec<GeoPoint>>,
    pub course_length_m: f64,
    pub start_ms: i64,
    pub speed_range_mps: (f64, f64),
    /// Seconds a runner is visible before passing a camera.
    pub fov_s: f64,
    pub fps: FrameRate,
    pub embedding_dim: usize,
    pub detection_stride_frames: u32,
    /// Trailing fraction of the visibility window in which the bib is legible.
    pub text_window_frac: f64,
    pub video_margin_s: f64,
    /// Each camera's recording split into this many clips.
    pub videos_per_camera: usize,
    /// Recording pause between consecutive clips of one camera.
    pub clip_gap_s: f64,
    pub digit_occlusion_prob: f64,
    pub false_text_prob: f64,
    pub embedding_noise_sigma: f64,
    pub n_distractors: usize,
    /// Runner indices whose bib is never read.
    pub unreadable_runners: BTreeSet<usize>,
    pub gps_noise_m: f64,
    pub gps_stray_prob: f64,
    pub gps_interval_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_runners: 127,
            n_cameras: 9,
            track: None,
            course_length_m: 5000.0,
            start_ms: DEFAULT_START_MS,
            speed_range_mps: (2.2, 4.5),
            fov_s: 4.0,
            fps: FrameRate::new(30, 1).expect("valid"),
            embedding_dim: 32,
            detection_stride_frames: 10,
            text_window_frac: 0.5,
            video_margin_s: 5.0,
            videos_per_camera: 1,
            clip_gap_s: 20.0,
            digit_occlusion_prob: 0.3,
            false_text_prob: 0.01,
            embedding_noise_sigma: 0.1,
            n_distractors: 200,
            unreadable_runners: BTreeSet::new(),
            gps_noise_m: 5.0,
            gps_stray_prob: 0.02,
            gps_interval_s: 1.0,
        }
    }
}

impl SimConfig {
    /// Perfect reads, exact embeddings, no distractors.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            seed,
            digit_occlusion_prob: 0.0,
            false_text_prob: 0.0,
            embedding_noise_sigma: 0.0,
            n_distractors: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(1..=999).contains(&self.n_runners) {
            return bad(format!("n_runners must be in 1..=999, got {}", self.n_runners));
        }
        if self.videos_per_camera == 0 {
            return bad("videos_per_camera must be at least 1".into());
        }
        if self.n_cameras == 0 {
            return bad("n_cameras must be at least 1".into());
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1".into());
        }
        if self.detection_stride_frames == 0 {
            return bad("detection_stride_frames must be at least 1".into());
        }
        for (name, p) in [
            ("digit_occlusion_prob", self.digit_occlusion_prob),
            ("false_text_prob", self.false_text_prob),
            ("gps_stray_prob", self.gps_stray_prob),
            ("text_window_frac", self.text_window_frac),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        for (name, x) in [
            ("embedding_noise_sigma", self.embedding_noise_sigma),
            ("gps_noise_m", self.gps_noise_m),
            ("video_margin_s", self.video_margin_s),
            ("clip_gap_s", self.clip_gap_s),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        let (lo, hi) = self.speed_range_mps;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("speed range ({lo}, {hi}) invalid"));
        }
        if !(self.fov_s > 0.0 && self.fov_s.is_finite()) {
            return bad(format!("fov_s must be positive, got {}", self.fov_s));
        }
        if !(self.gps_interval_s > 0.0 && self.gps_interval_s.is_finite()) {
            return bad(format!("gps_interval_s must be positive, got {}", self.gps_interval_s));
        }
        if self.track.is_none() && !(self.course_length_m > 100.0 && self.course_length_m.is_finite())
        {
            return bad(format!(
                "course_length_m must exceed 100, got {}",
                self.course_length_m
            ));
        }
        if let Some(&i) = self.unreadable_runners.iter().find(|&&i| i >= self.n_runners) {
            return bad(format!("unreadable runner {i} out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimCamera {
    pub camera_id: u32,
    pub video_ids: Vec<String>,
    pub arc_pos_m: f64,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPass {
    pub camera_id: u32,
    /// Seconds after the start.
    pub time_s: f64,
    /// Video and frames showing the pass; `None` when no clip covers it.
    pub seen: Option<(String, FrameInterval)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRunner {
    pub bib: BibNumber,
    pub speed_mps: f64,
    pub finish_duration_s: f64,
    pub prototype: Vec<f64>,
    pub passes: Vec<SimPass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld {
    pub track: Track,
    pub start: Timestamp,
    pub cameras: Vec<SimCamera>,
    pub runners: Vec<SimRunner>,
    pub videos: Vec<VideoMeta>,
    pub ground_truth: Vec<GroundTruthEntry>,
    /// Camera at the start line.
    pub start_camera: u32,
    pub warnings: Vec<String>,
}

impl SimWorld {
    pub fn roster(&self) -> BTreeSet<BibNumber> {
        self.runners.iter().map(|r| r.bib.clone()).collect()
    }

    /// Official gun times in seconds, rounded to the millisecond.
    pub fn finish_times(&self) -> BTreeMap<BibNumber, f64> {
        self.runners
            .iter()
            .map(|r| (r.bib.clone(), (r.finish_duration_s * 1000.0).round() / 1000.0))
            .collect()
    }

    /// Absolute time of a pass.
    pub fn pass_timestamp(&self, pass: &SimPass) -> Timestamp {
        self.start.add_millis((pass.time_s * 1000.0).round() as i64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub world: SimWorld,
    /// Sorted by video, then frame.
    pub detections: Vec<Detection>,
}

const STREAM_WORLD: u64 = 0;
const STREAM_PROTOTYPE: u64 = 1 << 40;
const STREAM_SIGHTING: u64 = 2 << 40;
const STREAM_DISTRACTOR: u64 = 3 << 40;
const STREAM_GPS: u64 = 4 << 40;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A sine-wave meander heading east from Delft, `length_m` long.
pub fn synthetic_course(length_m: f64) -> Vec<GeoPoint> {
    let origin = GeoPoint::new(52.0, 4.37).expect("valid");
    let proj = LocalProjection::new(origin, origin.lat());
    let y_at = |x: f64| 250.0 * (std::f64::consts::TAU * x / 2000.0).sin();
    let step = 25.0;
    let mut pts = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    let mut x: f64 = 0.0;
    while acc < length_m {
        let (px, py) = *pts.last().expect("non-empty");
        x += step;
        let (nx, ny) = (x, y_at(x));
        let seg = (nx - px).hypot(ny - py);
        if acc + seg >= length_m {
            let t = (length_m - acc) / seg;
            pts.push((px + t * (nx - px), py + t * (ny - py)));
            break;
        }
        acc += seg;
        pts.push((nx, ny));
    }
    pts.into_iter().map(|(x, y)| proj.from_xy(x, y)).collect()
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = l2_normalize(&v) {
            return u;
        }
    }
}

fn noisy_embedding(rng: &mut ChaCha8Rng, base: &[f64], sigma: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = base
            .iter()
            .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some(u) = l2_normalize(&v) {
            return u.into_iter().map(round_sig9).collect();
        }
    }
}

/// Random direction with the components along its nearest prototypes removed.
fn distractor_direction(rng: &mut ChaCha8Rng, prototypes: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let g = gaussian_unit(rng, dim);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut near: Vec<&Vec<f64>> = prototypes.iter().collect();
    near.sort_by(|a, b| dot(&g, b).total_cmp(&dot(&g, a)));
    near.truncate(3.min(dim.saturating_sub(1)));

    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in near {
        let mut v = p.clone();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        if let Some(u) = l2_normalize(&v) {
            basis.push(u);
        }
    }
    let mut out = g.clone();
    for b in &basis {
        let c = dot(&out, b);
        out.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
    l2_normalize(&out).unwrap_or(g)
}

/// Frame index nearest to `offset_ms` after video start.
fn frame_at(offset_ms: f64, fps: FrameRate) -> i64 {
    (offset_ms * fps.num() as f64 / (1000.0 * fps.den() as f64) + 0.5).floor() as i64
}

const LANE_WIDTH: f64 = 100.0;

fn person_box(lane: usize) -> BBox {
    BBox::new(lane as f64 * LANE_WIDTH, 100.0, 80.0, 200.0)
}

fn bib_box(lane: usize) -> BBox {
    BBox::new(lane as f64 * LANE_WIDTH + 25.0, 160.0, 30.0, 15.0)
}

fn stray_box(lane: usize) -> BBox {
    BBox::new(lane as f64 * LANE_WIDTH + 20.0, 120.0, 40.0, 15.0)
}

fn occlude(rng: &mut ChaCha8Rng, bib: &str, p: f64) -> String {
    bib.chars().filter(|_| rng.random::<f64>() >= p).collect()
}

fn random_digits(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
        .collect()
}

fn frames_of(interval: FrameInterval, stride: u32) -> Vec<u32> {
    let mut frames: Vec<u32> = (interval.start()..=interval.end())
        .step_by(stride as usize)
        .collect();
    if frames.last() != Some(&interval.end()) {
        frames.push(interval.end());
    }
    frames
}

pub fn generate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let track = Track::new(
        cfg.track
            .clone()
            .unwrap_or_else(|| synthetic_course(cfg.course_length_m)),
    )?;
    let length = track.total_length_m();
    let start = Timestamp::from_millis(cfg.start_ms);
    let mut warnings = Vec::new();

    let mut world_rng = rng_for(cfg.seed, STREAM_WORLD);
    let bib_numbers = sample(&mut world_rng, 999, cfg.n_runners).into_vec();
    let speeds: Vec<f64> = (0..cfg.n_runners)
        .map(|_| {
            let (lo, hi) = cfg.speed_range_mps;
            if hi > lo {
                world_rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();

    // camera 1 just past the start line, the last one shortly before the finish
    let first_arc = 15.0f64.min(length * 0.01);
    let last_arc = (length - 30.0).max(first_arc);
    let mut cameras: Vec<SimCamera> = (0..cfg.n_cameras)
        .map(|c| {
            let arc = if cfg.n_cameras == 1 {
                first_arc
            } else {
                first_arc + (last_arc - first_arc) * c as f64 / (cfg.n_cameras - 1) as f64
            };
            SimCamera {
                camera_id: c as u32 + 1,
                video_ids: Vec::new(),
                arc_pos_m: arc,
                point: track.point_at(arc),
            }
        })
        .collect();

    let prototypes: Vec<Vec<f64>> = (0..cfg.n_runners)
        .map(|i| {
            let mut rng = rng_for(cfg.seed, STREAM_PROTOTYPE | i as u64);
            gaussian_unit(&mut rng, cfg.embedding_dim)
        })
        .collect();

    // each camera records from before its first pass to after its last,
    // optionally split into clips
    let fps = cfg.fps;
    let mut videos = Vec::new();
    for cam in &mut cameras {
        let times = speeds.iter().map(|v| cam.arc_pos_m / v);
        let first = times.clone().fold(f64::INFINITY, f64::min);
        let last = times.fold(f64::NEG_INFINITY, f64::max);
        let v0 = (cfg.start_ms as f64 + (first - cfg.fov_s - cfg.video_margin_s) * 1000.0).floor()
            as i64;
        let v1 = (cfg.start_ms as f64 + (last + cfg.video_margin_s) * 1000.0).ceil() as i64;
        // fewer clips where the runners pass too quickly to pause in between
        let gap_ms = (cfg.clip_gap_s * 1000.0).round() as i64;
        let clip_len = |n: i64| (v1 - v0 - (n - 1) * gap_ms) / n;
        let mut n = cfg.videos_per_camera as i64;
        while n > 1 && clip_len(n) < gap_ms.max(1) {
            n -= 1;
        }
        let clip_ms = clip_len(n).max(1);
        cam.video_ids = (0..n)
            .map(|j| format!("cam{:02}-{:03}", cam.camera_id, j + 1))
            .collect();

        let mut rng = rng_for(cfg.seed, STREAM_GPS | u64::from(cam.camera_id));
        let proj = track.projection();
        let (cx, cy) = proj.to_xy(cam.point);
        let step_ms = (cfg.gps_interval_s * 1000.0).round().max(1.0) as i64;
        for (j, video_id) in cam.video_ids.iter().enumerate() {
            let c0 = v0 + j as i64 * (clip_ms + gap_ms);
            let n_fixes = (clip_ms / step_ms + 1) as usize;
            let mut trace = Vec::with_capacity(n_fixes);
            let mut prev_stray = true;
            for f in 0..n_fixes {
                let t = Timestamp::from_millis(c0 + f as i64 * step_ms);
                let nx: f64 = cfg.gps_noise_m * rng.sample::<f64, _>(StandardNormal);
                let ny: f64 = cfg.gps_noise_m * rng.sample::<f64, _>(StandardNormal);
                let interior = f + 1 < n_fixes;
                let stray = !prev_stray && interior && rng.random::<f64>() < cfg.gps_stray_prob;
                let (sx, sy) = if stray {
                    let d = rng.random_range(150.0..400.0);
                    let a = rng.random_range(0.0..std::f64::consts::TAU);
                    (d * a.cos(), d * a.sin())
                } else {
                    (0.0, 0.0)
                };
                prev_stray = stray;
                trace.push(GpsFix {
                    timestamp: t,
                    point: proj.from_xy(cx + nx + sx, cy + ny + sy),
                });
            }
            videos.push(VideoMeta::new(
                video_id.clone(),
                cam.camera_id,
                Timestamp::from_millis(c0 + clip_ms),
                clip_ms,
                fps,
                trace,
            )?);
        }
    }

    let mut detections = Vec::new();
    let mut ground_truth = Vec::new();
    let mut runners = Vec::with_capacity(cfg.n_runners);
    for i in 0..cfg.n_runners {
        let bib = BibNumber::parse(&(bib_numbers[i] + 1).to_string())?;
        let readable = !cfg.unreadable_runners.contains(&i);
        let mut passes = Vec::with_capacity(cameras.len());
        for cam in &cameras {
            let time_s = cam.arc_pos_m / speeds[i];
            let pass_ms = cfg.start_ms as f64 + time_s * 1000.0;
            // the clip that shows the whole approach
            let seen = videos
                .iter()
                .filter(|v| v.camera_id == cam.camera_id)
                .find_map(|video| {
                    let v0 = video.start().millis() as f64;
                    let s = frame_at(pass_ms - cfg.fov_s * 1000.0 - v0, fps);
                    let e = frame_at(pass_ms - v0, fps);
                    (s >= 0 && e < i64::from(video.frame_count())).then(|| {
                        let interval = FrameInterval::new(s as u32, e as u32).expect("s <= e");
                        (video.video_id.clone(), interval)
                    })
                });
            if seen.is_none() {
                warnings.push(format!(
                    "bib {bib} passes camera {} while it is not recording",
                    cam.camera_id
                ));
            }
            passes.push(SimPass {
                camera_id: cam.camera_id,
                time_s,
                seen: seen.clone(),
            });
            let Some((video_id, interval)) = seen else { continue };
            ground_truth.push(GroundTruthEntry {
                video_id: video_id.clone(),
                bib: bib.clone(),
                interval,
            });

            let mut rng = rng_for(
                cfg.seed,
                STREAM_SIGHTING | (i as u64) << 16 | u64::from(cam.camera_id),
            );
            let width = interval.end() - interval.start();
            let text_from = interval.start()
                + (f64::from(width) * (1.0 - cfg.text_window_frac)).ceil() as u32;
            for f in frames_of(interval, cfg.detection_stride_frames) {
                let emb = noisy_embedding(&mut rng, &prototypes[i], cfg.embedding_noise_sigma);
                detections.push(Detection::person(
                    video_id.clone(),
                    f,
                    rng.random_range(0.6..1.0),
                    Some(person_box(i)),
                    emb,
                ));
                if readable && f >= text_from {
                    let read = occlude(&mut rng, bib.as_str(), cfg.digit_occlusion_prob);
                    if !read.is_empty() {
                        detections.push(Detection::text(
                            video_id.clone(),
                            f,
                            read,
                            rng.random_range(0.5..1.0),
                            Some(bib_box(i)),
                        ));
                    }
                }
                if rng.random::<f64>() < cfg.false_text_prob {
                    detections.push(Detection::text(
                        video_id.clone(),
                        f,
                        random_digits(&mut rng),
                        rng.random_range(0.3..0.8),
                        Some(stray_box(i)),
                    ));
                }
            }
        }
        runners.push(SimRunner {
            bib,
            speed_mps: speeds[i],
            finish_duration_s: length / speeds[i],
            prototype: prototypes[i].clone(),
            passes,
        });
    }

    for d in 0..cfg.n_distractors {
        let mut rng = rng_for(cfg.seed, STREAM_DISTRACTOR | d as u64);
        let dir = distractor_direction(&mut rng, &prototypes, cfg.embedding_dim);
        let video = &videos[rng.random_range(0..videos.len())];
        let fc = video.frame_count();
        let len = (rng.random_range(1.0..4.0) * fps.as_f64()).round() as u32;
        let len = len.min(fc.saturating_sub(1));
        let s = rng.random_range(0..fc - len);
        let lane = cfg.n_runners + d;
        for f in frames_of(FrameInterval::new(s, s + len)?, cfg.detection_stride_frames) {
            let emb = noisy_embedding(&mut rng, &dir, cfg.embedding_noise_sigma);
            detections.push(Detection::person(
                video.video_id.clone(),
                f,
                rng.random_range(0.6..1.0),
                Some(person_box(lane)),
                emb,
            ));
            if rng.random::<f64>() < cfg.false_text_prob {
                detections.push(Detection::text(
                    video.video_id.clone(),
                    f,
                    random_digits(&mut rng),
                    rng.random_range(0.3..0.8),
                    Some(stray_box(lane)),
                ));
            }
        }
    }
    detections.sort_by(|a, b| (&a.video_id, a.frame).cmp(&(&b.video_id, b.frame)));

    Ok(SimOutput {
        world: SimWorld {
            track,
            start,
            start_camera: cameras[0].camera_id,
            cameras,
            runners,
            videos,
            ground_truth,
            warnings,
        },
        detections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::runner_timestamp;
    use crate::validate::validate_dataset;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            seed,
            n_runners: 12,
            n_cameras: 3,
            n_distractors: 5,
            ..SimConfig::default()
        }
    }

    #[test]
    fn course_has_requested_length() {
        let t = Track::new(synthetic_course(5000.0)).unwrap();
        assert!((t.total_length_m() - 5000.0).abs() < 1.0, "{}", t.total_length_m());
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate(&small(3)).unwrap(), generate(&small(3)).unwrap());
        assert_ne!(
            generate(&small(3)).unwrap().detections,
            generate(&small(4)).unwrap().detections
        );
    }

    #[test]
    fn output_validates() {
        let out = generate(&small(1)).unwrap();
        let w = &out.world;
        let report = validate_dataset(&w.videos, &out.detections, &w.ground_truth, Some(32));
        assert!(report.is_empty(), "{:?}", report.violations);
        assert!(w.warnings.is_empty());
        assert_eq!(w.ground_truth.len(), 12 * 3);
    }

    #[test]
    fn gt_window_matches_fov() {
        let out = generate(&small(2)).unwrap();
        let w = &out.world;
        for e in &w.ground_truth {
            let v = w.videos.iter().find(|v| v.video_id == e.video_id).unwrap();
            let s = runner_timestamp(v, e.interval.start()).unwrap();
            let t = runner_timestamp(v, e.interval.end()).unwrap();
            let frame_ms = 1000.0 / v.fps.as_f64();
            let err = ((t.millis() - s.millis()) as f64 - 4000.0).abs();
            assert!(err <= frame_ms + 1.0, "{err}");
        }
    }

    #[test]
    fn noiseless_embeddings_equal_prototypes() {
        let out = generate(&SimConfig {
            n_runners: 5,
            n_cameras: 2,
            ..SimConfig::noiseless(7)
        })
        .unwrap();
        let protos: Vec<Vec<f64>> = out
            .world
            .runners
            .iter()
            .map(|r| r.prototype.iter().map(|x| round_sig9(*x)).collect())
            .collect();
        for d in out.detections.iter().filter(|d| d.is_person()) {
            assert!(protos.contains(d.embedding.as_ref().unwrap()));
        }
    }

    #[test]
    fn full_occlusion_reads_nothing() {
        let out = generate(&SimConfig {
            digit_occlusion_prob: 1.0,
            false_text_prob: 0.0,
            ..small(5)
        })
        .unwrap();
        assert!(!out.detections.iter().any(|d| d.is_text()));
    }

    #[test]
    fn clips_leave_some_passes_unrecorded() {
        let out = generate(&SimConfig {
            videos_per_camera: 4,
            clip_gap_s: 30.0,
            ..small(6)
        })
        .unwrap();
        let w = &out.world;
        // the start camera sees everyone within seconds and cannot pause
        assert_eq!(w.cameras[0].video_ids.len(), 1);
        assert!(w.videos.len() > 3 && w.videos.len() <= 12);
        let missed = w.runners.iter().flat_map(|r| &r.passes).filter(|p| p.seen.is_none()).count();
        assert_eq!(missed, w.warnings.len());
        assert_eq!(w.ground_truth.len() + missed, 12 * 3);
        let report = validate_dataset(&w.videos, &out.detections, &w.ground_truth, Some(32));
        assert!(report.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SimConfig {
                n_runners: 0,
                ..SimConfig::default()
            },
            SimConfig {
                digit_occlusion_prob: 1.5,
                ..SimConfig::default()
            },
            SimConfig {
                embedding_noise_sigma: -0.1,
                ..SimConfig::default()
            },
        ] {
            assert!(matches!(generate(&cfg), Err(SimError::InvalidConfig(_))));
        }
    }
}
