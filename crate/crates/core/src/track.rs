//! Race course polyline and the local planar frame used for all distances.

use thiserror::Error;

use crate::types::GeoPoint;

/// Mean Earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("track needs at least 2 points, got {0}")]
    TooFewPoints(usize),
}

/// Equirectangular projection around a reference latitude.
///
/// `x` grows east, `y` grows north, both in meters from `origin`. Longitude
/// is scaled by `cos(ref_lat)`, which is linear in (lat, lon) so straight
/// segments map to straight segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProjection {
    origin: GeoPoint,
    cos_ref_lat: f64,
}

impl LocalProjection {
    pub fn new(origin: GeoPoint, ref_lat_deg: f64) -> Self {
        Self {
            origin,
            cos_ref_lat: ref_lat_deg.to_radians().cos(),
        }
    }

    /// Origin at the first point, reference latitude at the mean latitude.
    pub fn fit(points: &[GeoPoint]) -> Option<Self> {
        let first = *points.first()?;
        let mean_lat = points.iter().map(|p| p.lat()).sum::<f64>() / points.len() as f64;
        Some(Self::new(first, mean_lat))
    }

    pub fn to_xy(&self, p: GeoPoint) -> (f64, f64) {
        let x = EARTH_RADIUS_M * (p.lon() - self.origin.lon()).to_radians() * self.cos_ref_lat;
        let y = EARTH_RADIUS_M * (p.lat() - self.origin.lat()).to_radians();
        (x, y)
    }

    /// Inverse of [`to_xy`](Self::to_xy). Panics if the result leaves the
    /// valid coordinate range, which only happens thousands of km away.
    pub fn from_xy(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat() + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.origin.lon() + (x / (EARTH_RADIUS_M * self.cos_ref_lat)).to_degrees();
        GeoPoint::new(lat, lon).expect("local offset outside coordinate range")
    }

    pub fn distance(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        let (ax, ay) = self.to_xy(a);
        let (bx, by) = self.to_xy(b);
        (bx - ax).hypot(by - ay)
    }
}

/// Ordered course polyline with cumulative arc length per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    points: Vec<GeoPoint>,
    cum_length_m: Vec<f64>,
    projection: LocalProjection,
}

impl Track {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, TrackError> {
        if points.len() < 2 {
            return Err(TrackError::TooFewPoints(points.len()));
        }
        let projection = LocalProjection::fit(&points).expect("non-empty");
        let mut cum_length_m = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum_length_m.push(acc);
        for w in points.windows(2) {
            acc += projection.distance(w[0], w[1]);
            cum_length_m.push(acc);
        }
        Ok(Self {
            points,
            cum_length_m,
            projection,
        })
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn cum_length_m(&self) -> &[f64] {
        &self.cum_length_m
    }

    pub fn projection(&self) -> &LocalProjection {
        &self.projection
    }

    pub fn total_length_m(&self) -> f64 {
        *self.cum_length_m.last().expect("track has points")
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> GeoPoint {
        self.points[0]
    }

    pub fn end(&self) -> GeoPoint {
        *self.points.last().expect("track has points")
    }

    /// Point at arc position `arc_m`, clamped to `[0, total length]`.
    pub fn point_at(&self, arc_m: f64) -> GeoPoint {
        let arc = arc_m.clamp(0.0, self.total_length_m());
        // last vertex whose cumulative length is <= arc
        let i = self.cum_length_m.partition_point(|&c| c <= arc).saturating_sub(1);
        let i = i.min(self.segment_count() - 1);
        let seg_len = self.cum_length_m[i + 1] - self.cum_length_m[i];
        if seg_len <= 0.0 {
            return self.points[i];
        }
        let t = ((arc - self.cum_length_m[i]) / seg_len).clamp(0.0, 1.0);
        lerp(self.points[i], self.points[i + 1], t)
    }
}

/// Linear interpolation in (lat, lon), exact under the planar approximation.
pub(crate) fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    GeoPoint::new(
        a.lat() + (b.lat() - a.lat()) * t,
        a.lon() + (b.lon() - a.lon()) * t,
    )
    .expect("convex combination of valid points")
}
