//! Shared domain values: identities, coordinates, time and detections.
//!
//! Everything here is an immutable value object. Constructors enforce the
//! invariants so downstream modules can rely on them without re-checking.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("invalid bib number {0:?}: expected one or more decimal digits")]
    InvalidBib(String),
    #[error("invalid coordinate lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("invalid frame interval [{start}, {end}]")]
    InvalidInterval { start: u32, end: u32 },
    #[error("invalid frame rate {0:?}")]
    InvalidFrameRate(String),
    #[error("invalid timestamp {0:?}: {1}")]
    InvalidTimestamp(String, String),
    #[error("invalid video metadata for {video_id}: {reason}")]
    InvalidVideo { video_id: String, reason: String },
}

/// Runner identity as printed on the bib tag.
///
/// Kept as a string: identity is nominal and leading zeros must survive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BibNumber(String);

impl BibNumber {
    pub fn parse(s: &str) -> Result<Self, TypeError> {
        if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Self(s.to_owned()))
        } else {
            Err(TypeError::InvalidBib(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl FromStr for BibNumber {
    type Err = TypeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl TryFrom<String> for BibNumber {
    type Error = TypeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<BibNumber> for String {
    fn from(b: BibNumber) -> String {
        b.0
    }
}

impl fmt::Display for BibNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, TypeError> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        if ok {
            Ok(Self { lat, lon })
        } else {
            Err(TypeError::InvalidCoordinate { lat, lon })
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// GeoJSON coordinate order.
    pub fn to_lon_lat(self) -> [f64; 2] {
        [self.lon, self.lat]
    }

    pub fn from_lon_lat(c: [f64; 2]) -> Result<Self, TypeError> {
        Self::new(c[1], c[0])
    }
}

// Serialized as GeoJSON-style [lon, lat].
impl TryFrom<[f64; 2]> for GeoPoint {
    type Error = TypeError;
    fn try_from(c: [f64; 2]) -> Result<Self, Self::Error> {
        Self::from_lon_lat(c)
    }
}

impl From<GeoPoint> for [f64; 2] {
    fn from(p: GeoPoint) -> [f64; 2] {
        p.to_lon_lat()
    }
}

/// Absolute time as integer milliseconds since the Unix epoch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Self(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub const fn add_millis(self, ms: i64) -> Self {
        Self(self.0 + ms)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Parses ISO-8601 / RFC 3339. An explicit UTC offset is required.
    pub fn parse_rfc3339(s: &str) -> Result<Self, TypeError> {
        DateTime::parse_from_rfc3339(s.trim())
            .map(|dt| Self(dt.timestamp_millis()))
            .map_err(|e| TypeError::InvalidTimestamp(s.to_owned(), e.to_string()))
    }

    pub fn to_rfc3339(self) -> String {
        match DateTime::<Utc>::from_timestamp_millis(self.0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rfc3339())
    }
}

/// Exact rational frame rate, e.g. `30/1` or `30000/1001`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameRate {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl FrameRate {
    pub fn new(num: u64, den: u64) -> Result<Self, TypeError> {
        if num == 0 || den == 0 {
            return Err(TypeError::InvalidFrameRate(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub const fn integer(fps: u32) -> Self {
        Self {
            num: fps as u64,
            den: 1,
        }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Accepts `30`, `29.97` (exact decimal) or `30000/1001`.
    pub fn parse(s: &str) -> Result<Self, TypeError> {
        let bad = || TypeError::InvalidFrameRate(s.to_owned());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 9
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int_v: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int_v
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Self::new(num, den).map_err(|_| bad())
    }
}

impl TryFrom<String> for FrameRate {
    type Error = TypeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<FrameRate> for String {
    fn from(r: FrameRate) -> String {
        r.to_string()
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// One GPS fix from the camera's own receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub timestamp: Timestamp,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    pub video_id: String,
    pub camera_id: u32,
    /// File modification time, i.e. the moment recording stopped.
    pub last_modified: Timestamp,
    pub duration_ms: i64,
    pub fps: FrameRate,
    pub gps_trace: Vec<GpsFix>,
}

impl VideoMeta {
    pub fn new(
        video_id: impl Into<String>,
        camera_id: u32,
        last_modified: Timestamp,
        duration_ms: i64,
        fps: FrameRate,
        gps_trace: Vec<GpsFix>,
    ) -> Result<Self, TypeError> {
        let meta = Self {
            video_id: video_id.into(),
            camera_id,
            last_modified,
            duration_ms,
            fps,
            gps_trace,
        };
        if let Some(reason) = meta.invariant_violation() {
            return Err(TypeError::InvalidVideo {
                video_id: meta.video_id,
                reason,
            });
        }
        Ok(meta)
    }

    pub(crate) fn invariant_violation(&self) -> Option<String> {
        if self.video_id.is_empty() {
            return Some("empty video id".into());
        }
        if self.duration_ms <= 0 {
            return Some(format!("duration must be positive, got {} ms", self.duration_ms));
        }
        if self
            .gps_trace
            .windows(2)
            .any(|w| w[1].timestamp < w[0].timestamp)
        {
            return Some("gps trace timestamps decrease".into());
        }
        None
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms as f64 / 1000.0
    }

    pub fn start(&self) -> Timestamp {
        self.last_modified.add_millis(-self.duration_ms)
    }

    /// Number of frames, `ceil(duration * fps)`. Valid frames are `0..frame_count`.
    pub fn frame_count(&self) -> u32 {
        let num = self.duration_ms as i128 * self.fps.num() as i128;
        let den = 1000 * self.fps.den() as i128;
        let n = (num + den - 1) / den;
        n.clamp(0, u32::MAX as i128) as u32
    }

    pub fn contains_frame(&self, frame: u32) -> bool {
        frame < self.frame_count()
    }
}

/// Inclusive frame span `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 2]", into = "[u32; 2]")]
pub struct FrameInterval {
    start: u32,
    end: u32,
}

impl FrameInterval {
    pub fn new(start: u32, end: u32) -> Result<Self, TypeError> {
        if start <= end {
            Ok(Self { start, end })
        } else {
            Err(TypeError::InvalidInterval { start, end })
        }
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    /// Smallest span covering every frame; `None` when empty.
    pub fn spanning(frames: impl IntoIterator<Item = u32>) -> Option<Self> {
        frames.into_iter().fold(None, |acc, f| match acc {
            None => Some(Self { start: f, end: f }),
            Some(iv) => Some(Self {
                start: iv.start.min(f),
                end: iv.end.max(f),
            }),
        })
    }

    pub fn cover(self, other: Self) -> Self {
        Self {
            start: self.start.min(other.start),
            end: self.end.max(other.end),
        }
    }
}

impl TryFrom<[u32; 2]> for FrameInterval {
    type Error = TypeError;
    fn try_from(v: [u32; 2]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1])
    }
}

impl From<FrameInterval> for [u32; 2] {
    fn from(iv: FrameInterval) -> [u32; 2] {
        [iv.start, iv.end]
    }
}

/// Axis-aligned rectangle in pixels: top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> [f64; 4] {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Text,
    Person,
}

/// A single observation in one frame: a text read or a person crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub video_id: String,
    pub frame: u32,
    pub kind: DetectionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "serialize_embedding"
    )]
    pub embedding: Option<Vec<f64>>,
}

impl Detection {
    pub fn text(
        video_id: impl Into<String>,
        frame: u32,
        text: impl Into<String>,
        confidence: f64,
        bbox: Option<BBox>,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            frame,
            kind: DetectionKind::Text,
            text: Some(text.into()),
            confidence,
            bbox,
            embedding: None,
        }
    }

    pub fn person(
        video_id: impl Into<String>,
        frame: u32,
        confidence: f64,
        bbox: Option<BBox>,
        embedding: Vec<f64>,
    ) -> Self {
        Self {
            video_id: video_id.into(),
            frame,
            kind: DetectionKind::Person,
            text: None,
            confidence,
            bbox,
            embedding: Some(embedding),
        }
    }

    pub fn is_text(&self) -> bool {
        self.kind == DetectionKind::Text
    }

    pub fn is_person(&self) -> bool {
        self.kind == DetectionKind::Person
    }
}

/// Rounds to 9 significant decimal digits, the on-disk embedding precision.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn serialize_embedding<S: serde::Serializer>(
    v: &Option<Vec<f64>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_seq(v.iter().map(|x| round_sig9(*x))),
        None => s.serialize_none(),
    }
}

/// Annotated appearance of one runner in one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub video_id: String,
    pub bib: BibNumber,
    pub interval: FrameInterval,
}
