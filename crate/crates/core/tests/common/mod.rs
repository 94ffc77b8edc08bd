//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use racetrace::geo::StrayFilterConfig;
use racetrace::track::{LocalProjection, Track, EARTH_RADIUS_M};
use racetrace::types::{FrameInterval, GeoPoint, VideoMeta};

/// `last_modified - duration + f / fps`, with the offset rounded half up
/// to the millisecond, computed in arbitrary-precision rationals.
pub fn timestamp_oracle(meta: &VideoMeta, frame: u32) -> i64 {
    let fps = BigRational::new(BigInt::from(meta.fps.num()), BigInt::from(meta.fps.den()));
    let offset_ms = BigRational::from_integer(BigInt::from(frame) * 1000) / fps;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let rounded = (offset_ms + half).floor();
    assert!(!rounded.is_negative());
    let start = meta.last_modified.millis() - meta.duration_ms;
    start + rounded.to_integer().to_i64().unwrap()
}

/// IoU over explicit frame sets, each span taken as `start..end`.
pub fn frame_set_iou(a: FrameInterval, b: FrameInterval) -> f64 {
    let sa: BTreeSet<u32> = (a.start()..a.end()).collect();
    let sb: BTreeSet<u32> = (b.start()..b.end()).collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    if union == 0 {
        if a == b {
            1.0
        } else {
            0.0
        }
    } else {
        inter as f64 / union as f64
    }
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).max(0.0)
}

/// Full scan: every distance, stable sort, first k.
pub fn brute_force_knn(query: &[f64], gallery: &[Vec<f64>], k: usize) -> (Vec<usize>, Vec<f64>) {
    let q = normalize(query);
    let mut all: Vec<(f64, usize)> = gallery
        .iter()
        .enumerate()
        .map(|(i, g)| (cosine(&q, &normalize(g)), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(k);
    (all.iter().map(|x| x.1).collect(), all.iter().map(|x| x.0).collect())
}

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la1, la2) = (a.lat().to_radians(), b.lat().to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon() - a.lon()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Distance to the nearest of densely spaced points along the course.
pub fn dense_snap_distance(p: GeoPoint, track: &Track, spacing_m: f64) -> f64 {
    let n = (track.total_length_m() / spacing_m).ceil() as usize;
    (0..=n)
        .map(|i| track.point_at((i as f64 * spacing_m).min(track.total_length_m())))
        .map(|q| haversine_m(p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Stray detection from the angle between the two neighbor vectors.
/// Repeats on survivors until a pass flags nothing.
pub fn stray_oracle(traj: &[GeoPoint], cfg: &StrayFilterConfig) -> Vec<usize> {
    let Some(proj) = LocalProjection::fit(traj) else {
        return Vec::new();
    };
    let xy: Vec<(f64, f64)> = traj.iter().map(|p| proj.to_xy(*p)).collect();
    let mut alive: Vec<usize> = (0..traj.len()).collect();
    let mut flagged = Vec::new();
    loop {
        let mut this_pass = Vec::new();
        for w in alive.windows(3) {
            let (a, b, c) = (xy[w[0]], xy[w[1]], xy[w[2]]);
            let u = (a.0 - b.0, a.1 - b.1);
            let v = (c.0 - b.0, c.1 - b.1);
            let (nu, nv) = (u.0.hypot(u.1), v.0.hypot(v.1));
            if nu == 0.0 || nv == 0.0 {
                continue;
            }
            let angle = (u.0 * v.1 - u.1 * v.0).abs().atan2(u.0 * v.0 + u.1 * v.1).to_degrees();
            if angle < cfg.min_apex_angle_deg && nu > cfg.max_neighbor_dist_m && nv > cfg.max_neighbor_dist_m {
                this_pass.push(w[1]);
            }
        }
        if this_pass.is_empty() {
            break;
        }
        alive.retain(|i| !this_pass.contains(i));
        flagged.extend(this_pass);
    }
    flagged.sort_unstable();
    flagged
}

/// Straight walk heading east from `origin`, one point every `step_m`.
pub fn walk(origin: GeoPoint, n: usize, step_m: f64) -> Vec<GeoPoint> {
    let proj = LocalProjection::new(origin, origin.lat());
    (0..n).map(|i| proj.from_xy(i as f64 * step_m, 0.0)).collect()
}

/// The same walk with the middle point pushed `spike_m` north.
pub fn spiked_walk(origin: GeoPoint, n: usize, step_m: f64, spike_m: f64) -> Vec<GeoPoint> {
    let proj = LocalProjection::new(origin, origin.lat());
    (0..n)
        .map(|i| {
            let y = if i == n / 2 { spike_m } else { 0.0 };
            proj.from_xy(i as f64 * step_m, y)
        })
        .collect()
}
