//! Camera GPS clean-up and positions along the course.
//!
//! Raw camera fixes are snapped onto the course polyline, spikes are removed
//! with a law-of-cosines apex test, and any residual strays can be replaced
//! from an override file. Runner positions between waypoints are linear in
//! arc length.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::{lerp, LocalProjection, Track};
use crate::types::{GeoPoint, Timestamp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("override index {index} out of range for trajectory of {len} points")]
    OverrideOutOfRange { index: usize, len: usize },
    #[error("time {t} outside waypoint range [{first}, {last}]")]
    TimeOutOfRange {
        t: Timestamp,
        first: Timestamp,
        last: Timestamp,
    },
    #[error("waypoints not sorted by time at index {0}")]
    UnsortedWaypoints(usize),
    #[error("need at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("invalid stray filter config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapResult {
    pub point: GeoPoint,
    pub arc_pos_m: f64,
    pub segment_index: usize,
    /// Planar distance from the query point to `point`.
    pub distance_m: f64,
}

/// Closest point on the course polyline. Ties go to the lowest segment.
pub fn snap_to_track(p: GeoPoint, track: &Track) -> SnapResult {
    let proj = track.projection();
    let (px, py) = proj.to_xy(p);
    let pts = track.points();
    let cum = track.cum_length_m();

    let mut best: Option<(f64, usize, f64)> = None;
    let mut a = proj.to_xy(pts[0]);
    for i in 0..track.segment_count() {
        let b = proj.to_xy(pts[i + 1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (fx, fy) = (a.0 + t * dx, a.1 + t * dy);
        let d2 = (px - fx).powi(2) + (py - fy).powi(2);
        if best.is_none_or(|(bd2, _, _)| d2 < bd2) {
            best = Some((d2, i, t));
        }
        a = b;
    }

    let (d2, i, t) = best.expect("track has at least one segment");
    SnapResult {
        point: lerp(pts[i], pts[i + 1], t),
        arc_pos_m: cum[i] + t * (cum[i + 1] - cum[i]),
        segment_index: i,
        distance_m: d2.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrayFilterConfig {
    pub min_apex_angle_deg: f64,
    pub max_neighbor_dist_m: f64,
}

impl Default for StrayFilterConfig {
    fn default() -> Self {
        Self {
            min_apex_angle_deg: 30.0,
            max_neighbor_dist_m: 50.0,
        }
    }
}

impl StrayFilterConfig {
    pub fn new(min_apex_angle_deg: f64, max_neighbor_dist_m: f64) -> Result<Self, GeoError> {
        if !(min_apex_angle_deg > 0.0 && min_apex_angle_deg < 180.0) {
            return Err(GeoError::InvalidConfig(format!(
                "apex angle {min_apex_angle_deg} not in (0, 180)"
            )));
        }
        if !(max_neighbor_dist_m > 0.0 && max_neighbor_dist_m.is_finite()) {
            return Err(GeoError::InvalidConfig(format!(
                "neighbor distance {max_neighbor_dist_m} must be positive"
            )));
        }
        Ok(Self {
            min_apex_angle_deg,
            max_neighbor_dist_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StrayFilterResult {
    pub kept: Vec<GeoPoint>,
    /// Indices into the input trajectory, ascending.
    pub flagged: Vec<usize>,
}

/// Apex angle at `b` (degrees) from the three side lengths, law of cosines.
/// `None` when either adjacent side is degenerate.
pub fn apex_angle_deg(ab: f64, bc: f64, ac: f64) -> Option<f64> {
    if ab <= 0.0 || bc <= 0.0 {
        return None;
    }
    let cos_b = ((ab * ab + bc * bc - ac * ac) / (2.0 * ab * bc)).clamp(-1.0, 1.0);
    Some(cos_b.acos().to_degrees())
}

/// Removes spike points: an interior point is a stray when the apex angle it
/// forms with its neighbors is below the threshold and both neighbors are
/// farther than the distance threshold. Passes repeat on the surviving points
/// until nothing is flagged, so the output is a fixed point of the filter.
pub fn stray_filter(traj: &[GeoPoint], cfg: &StrayFilterConfig) -> StrayFilterResult {
    let Some(proj) = LocalProjection::fit(traj) else {
        return StrayFilterResult::default();
    };
    let xy: Vec<(f64, f64)> = traj.iter().map(|p| proj.to_xy(*p)).collect();
    let dist = |i: usize, j: usize| (xy[i].0 - xy[j].0).hypot(xy[i].1 - xy[j].1);

    let mut alive: Vec<usize> = (0..traj.len()).collect();
    let mut flagged = Vec::new();
    loop {
        let mut round = Vec::new();
        for w in alive.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let (ab, bc) = (dist(a, b), dist(b, c));
            let Some(angle) = apex_angle_deg(ab, bc, dist(a, c)) else {
                continue;
            };
            if angle < cfg.min_apex_angle_deg && ab.min(bc) > cfg.max_neighbor_dist_m {
                round.push(b);
            }
        }
        if round.is_empty() {
            break;
        }
        alive.retain(|i| round.binary_search(i).is_err());
        flagged.extend(round);
    }
    flagged.sort_unstable();

    StrayFilterResult {
        kept: alive.iter().map(|&i| traj[i]).collect(),
        flagged,
    }
}

/// Replaces selected points of a trajectory.
pub fn apply_overrides(
    traj: &[GeoPoint],
    overrides: &BTreeMap<usize, GeoPoint>,
) -> Result<Vec<GeoPoint>, GeoError> {
    let mut out = traj.to_vec();
    for (&index, &p) in overrides {
        let slot = out.get_mut(index).ok_or(GeoError::OverrideOutOfRange {
            index,
            len: traj.len(),
        })?;
        *slot = p;
    }
    Ok(out)
}

/// A camera GPS fix after snapping onto the course.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraFix {
    pub timestamp: Timestamp,
    pub snap: SnapResult,
}

/// Outcome of cleaning one video's GPS trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredTrace {
    pub raw: Vec<GeoPoint>,
    /// Input indices removed by the stray filter and not overridden.
    pub flagged: Vec<usize>,
    /// Surviving fixes, in input order, snapped onto the course.
    pub fixes: Vec<CameraFix>,
}

impl FilteredTrace {
    pub fn points(&self) -> Vec<GeoPoint> {
        self.fixes.iter().map(|f| f.snap.point).collect()
    }

    /// Camera position nearest in time to `t`; ties go to the earlier fix.
    pub fn position_at(&self, t: Timestamp) -> Option<&SnapResult> {
        let i = self.fixes.partition_point(|f| f.timestamp < t);
        let before = i.checked_sub(1).map(|j| &self.fixes[j]);
        let after = self.fixes.get(i);
        match (before, after) {
            (Some(b), Some(a)) => {
                let db = t.millis() - b.timestamp.millis();
                let da = a.timestamp.millis() - t.millis();
                Some(if da < db { &a.snap } else { &b.snap })
            }
            (Some(b), None) => Some(&b.snap),
            (None, Some(a)) => Some(&a.snap),
            (None, None) => None,
        }
    }
}

/// Snap, stray-filter, then apply manual overrides to a timed GPS trace.
///
/// Override indices refer to positions in the raw trace. An overridden point
/// is kept even if the stray filter flagged it.
pub fn filter_trace(
    trace: &[(Timestamp, GeoPoint)],
    track: &Track,
    cfg: &StrayFilterConfig,
    overrides: &BTreeMap<usize, GeoPoint>,
) -> Result<FilteredTrace, GeoError> {
    let raw: Vec<GeoPoint> = trace.iter().map(|(_, p)| *p).collect();
    let snapped: Vec<GeoPoint> = raw.iter().map(|p| snap_to_track(*p, track).point).collect();
    let strays = stray_filter(&snapped, cfg);
    let corrected = apply_overrides(&snapped, overrides)?;
    let flagged: Vec<usize> = strays
        .flagged
        .into_iter()
        .filter(|i| !overrides.contains_key(i))
        .collect();
    let fixes = corrected
        .iter()
        .enumerate()
        .filter(|(i, _)| flagged.binary_search(i).is_err())
        .map(|(i, p)| CameraFix {
            timestamp: trace[i].0,
            snap: snap_to_track(*p, track),
        })
        .collect();
    Ok(FilteredTrace {
        raw,
        flagged,
        fixes,
    })
}

/// A (time, arc position) pair along the course.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcWaypoint {
    pub timestamp: Timestamp,
    pub arc_pos_m: f64,
}

/// Arc position at time `t`, linear between the bracketing waypoints.
pub fn interpolate_arc(waypoints: &[ArcWaypoint], t: Timestamp) -> Result<f64, GeoError> {
    if waypoints.len() < 2 {
        return Err(GeoError::TooFewWaypoints(waypoints.len()));
    }
    if let Some(i) = waypoints
        .windows(2)
        .position(|w| w[1].timestamp < w[0].timestamp)
    {
        return Err(GeoError::UnsortedWaypoints(i + 1));
    }
    let first = waypoints[0].timestamp;
    let last = waypoints[waypoints.len() - 1].timestamp;
    if t < first || t > last {
        return Err(GeoError::TimeOutOfRange { t, first, last });
    }
    // first waypoint strictly after t; t == last falls back to the final pair
    let hi = waypoints
        .partition_point(|w| w.timestamp <= t)
        .clamp(1, waypoints.len() - 1);
    let (a, b) = (waypoints[hi - 1], waypoints[hi]);
    if t == a.timestamp {
        return Ok(a.arc_pos_m);
    }
    if t == b.timestamp {
        return Ok(b.arc_pos_m);
    }
    let span = (b.timestamp.millis() - a.timestamp.millis()) as f64;
    let frac = (t.millis() - a.timestamp.millis()) as f64 / span;
    Ok(a.arc_pos_m + frac * (b.arc_pos_m - a.arc_pos_m))
}

/// Runner position on the course at time `t`.
pub fn interpolate_position(
    waypoints: &[ArcWaypoint],
    t: Timestamp,
    track: &Track,
) -> Result<GeoPoint, GeoError> {
    interpolate_arc(waypoints, t).map(|arc| track.point_at(arc))
}
