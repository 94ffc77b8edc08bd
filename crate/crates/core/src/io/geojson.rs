//! The few GeoJSON shapes used here: LineString features and collections.
//! Coordinates are `[lon, lat]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geo::FilteredTrace;
use crate::track::Track;
use crate::types::{GeoPoint, GpsFix, Timestamp, VideoMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineString {
    #[serde(rename = "type")]
    pub kind: String,
    pub coordinates: Vec<[f64; 2]>,
}

impl LineString {
    pub fn new(points: impl IntoIterator<Item = GeoPoint>) -> Self {
        Self {
            kind: "LineString".into(),
            coordinates: points.into_iter().map(GeoPoint::to_lon_lat).collect(),
        }
    }

    pub fn points(&self, path: &Path) -> Result<Vec<GeoPoint>, IoError> {
        if self.kind != "LineString" {
            return Err(IoError::schema(
                path,
                format!("expected a LineString geometry, got {:?}", self.kind),
            ));
        }
        self.coordinates
            .iter()
            .map(|&c| GeoPoint::from_lon_lat(c).map_err(|e| IoError::schema(path, e)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature<P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub geometry: LineString,
    pub properties: P,
}

impl<P> Feature<P> {
    pub fn new(geometry: LineString, properties: P) -> Self {
        Self {
            kind: "Feature".into(),
            geometry,
            properties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCollection<P> {
    #[serde(rename = "type")]
    pub kind: String,
    pub features: Vec<Feature<P>>,
}

impl<P> FeatureCollection<P> {
    pub fn new(features: Vec<Feature<P>>) -> Self {
        Self {
            kind: "FeatureCollection".into(),
            features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackProperties {
    pub schema_version: u32,
    pub name: String,
    pub length_m: f64,
}

pub fn track_feature(track: &Track, name: &str) -> Feature<TrackProperties> {
    Feature::new(
        LineString::new(track.points().iter().copied()),
        TrackProperties {
            schema_version: super::SCHEMA_VERSION,
            name: name.to_owned(),
            length_m: track.total_length_m(),
        },
    )
}

pub fn parse_track(path: &Path, text: &str) -> Result<Track, IoError> {
    let f: Feature<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| IoError::parse(path, e.line() as u64, e))?;
    Track::new(f.geometry.points(path)?).map_err(|e| IoError::schema(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsProperties {
    pub schema_version: u32,
    pub video_id: String,
    /// One RFC 3339 timestamp per coordinate.
    pub timestamps: Vec<String>,
}

/// Per-video GPS sidecar.
pub fn gps_feature(video_id: &str, trace: &[GpsFix]) -> Feature<GpsProperties> {
    Feature::new(
        LineString::new(trace.iter().map(|f| f.point)),
        GpsProperties {
            schema_version: super::SCHEMA_VERSION,
            video_id: video_id.to_owned(),
            timestamps: trace.iter().map(|f| f.timestamp.to_rfc3339()).collect(),
        },
    )
}

pub fn parse_gps(path: &Path, text: &str) -> Result<(String, Vec<GpsFix>), IoError> {
    let f: Feature<GpsProperties> =
        serde_json::from_str(text).map_err(|e| IoError::parse(path, e.line() as u64, e))?;
    let points = f.geometry.points(path)?;
    if points.len() != f.properties.timestamps.len() {
        return Err(IoError::schema(
            path,
            format!(
                "{} coordinates but {} timestamps",
                points.len(),
                f.properties.timestamps.len()
            ),
        ));
    }
    let fixes = points
        .into_iter()
        .zip(&f.properties.timestamps)
        .map(|(point, ts)| {
            let timestamp = Timestamp::parse_rfc3339(ts).map_err(|e| IoError::schema(path, e))?;
            Ok(GpsFix { timestamp, point })
        })
        .collect::<Result<_, IoError>>()?;
    Ok((f.properties.video_id, fixes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProperties {
    pub video_id: String,
    pub camera_id: u32,
    /// `raw` or `filtered`.
    pub kind: String,
    /// Raw-trace indices removed as strays (raw feature only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged: Vec<usize>,
}

/// Raw and filtered camera trajectories, two features per video.
pub fn trajectories(
    videos: &[VideoMeta],
    traces: &BTreeMap<String, FilteredTrace>,
) -> FeatureCollection<TrajectoryProperties> {
    let mut features = Vec::new();
    let mut sorted: Vec<&VideoMeta> = videos.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    for v in sorted {
        let Some(t) = traces.get(&v.video_id) else { continue };
        features.push(Feature::new(
            LineString::new(t.raw.iter().copied()),
            TrajectoryProperties {
                video_id: v.video_id.clone(),
                camera_id: v.camera_id,
                kind: "raw".into(),
                flagged: t.flagged.clone(),
            },
        ));
        features.push(Feature::new(
            LineString::new(t.points()),
            TrajectoryProperties {
                video_id: v.video_id.clone(),
                camera_id: v.camera_id,
                kind: "filtered".into(),
                flagged: Vec::new(),
            },
        ));
    }
    FeatureCollection::new(features)
}
