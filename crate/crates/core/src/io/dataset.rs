use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geojson::{gps_feature, parse_gps, parse_track, track_feature};
use super::{
    read_json, read_to_string, to_canonical_json, to_canonical_line, write_atomic, write_json,
    IoError, SCHEMA_VERSION,
};
use crate::dataset::{Dataset, Overrides};
use crate::types::{
    BibNumber, Detection, FrameInterval, FrameRate, GroundTruthEntry, Timestamp, VideoMeta,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFiles {
    pub videos: String,
    pub detections: String,
    pub groundtruth: String,
    pub roster: String,
    pub finish_times: String,
    pub track: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<String>,
}

impl Default for ManifestFiles {
    fn default() -> Self {
        Self {
            videos: "videos.csv".into(),
            detections: "detections.jsonl".into(),
            groundtruth: "groundtruth.csv".into(),
            roster: "roster.txt".into(),
            finish_times: "finish_times.csv".into(),
            track: "track.geojson".into(),
            overrides: Some("overrides.json".into()),
        }
    }
}

/// Dataset index; file paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    pub embedding_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_camera: Option<u32>,
    pub files: ManifestFiles,
}

#[derive(Debug, Serialize, Deserialize)]
struct VideoRow {
    video_id: String,
    camera_id: u32,
    last_modified: String,
    duration_s: String,
    fps: String,
    gps_trace: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct GtRow {
    video_id: String,
    bib: String,
    frame_start: u32,
    frame_end: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct FinishRow {
    bib: String,
    finish_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionsHeader {
    schema_version: u32,
    embedding_dim: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct OverridesFile {
    schema_version: u32,
    overrides: Overrides,
}

fn schema_line() -> String {
    format!("# schema_version={SCHEMA_VERSION}\n")
}

fn check_schema_line(path: &Path, text: &str) -> Result<(), IoError> {
    let first = text.lines().next().unwrap_or_default();
    match first.strip_prefix("# schema_version=") {
        Some(v) if v.trim() == SCHEMA_VERSION.to_string() => Ok(()),
        Some(v) => Err(IoError::parse(path, 1, format!("unsupported schema version {v}"))),
        None => Err(IoError::parse(path, 1, "missing `# schema_version=` line")),
    }
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = schema_line().into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    for r in rows {
        w.serialize(r).expect("in-memory CSV write");
    }
    w.flush().expect("in-memory CSV write");
    drop(w);
    out
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>, IoError> {
    let text = read_to_string(path)?;
    check_schema_line(path, &text)?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let line_of = |p: Option<&csv::Position>| p.map_or(0, csv::Position::line);
    let headers = r
        .headers()
        .map_err(|e| IoError::parse(path, line_of(e.position()), e))?
        .clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| IoError::parse(path, line_of(e.position()), e))?;
        let line = line_of(rec.position());
        let row = rec
            .deserialize(Some(&headers))
            .map_err(|e| IoError::parse(path, line, e))?;
        out.push((line, row));
    }
    Ok(out)
}

fn format_duration(ms: i64) -> String {
    format!("{}.{:03}", ms / 1000, ms % 1000)
}

fn gps_path(video_id: &str) -> String {
    format!("gps/{video_id}.geojson")
}

/// Writes `ds` as a dataset directory and returns the manifest path.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<PathBuf, IoError> {
    let files = ManifestFiles::default();
    let at = |rel: &str| dir.join(rel);

    let mut videos: Vec<&VideoMeta> = ds.videos.iter().collect();
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    for v in &videos {
        write_json(&at(&gps_path(&v.video_id)), &gps_feature(&v.video_id, &v.gps_trace))?;
    }
    write_atomic(
        &at(&files.videos),
        &csv_bytes(videos.iter().map(|v| VideoRow {
            video_id: v.video_id.clone(),
            camera_id: v.camera_id,
            last_modified: v.last_modified.to_rfc3339(),
            duration_s: format_duration(v.duration_ms),
            fps: v.fps.to_string(),
            gps_trace: gps_path(&v.video_id),
        })),
    )?;

    let mut jsonl = to_canonical_line(&DetectionsHeader {
        schema_version: SCHEMA_VERSION,
        embedding_dim: ds.embedding_dim,
    })
    .expect("header serializes");
    jsonl.push('\n');
    for d in &ds.detections {
        jsonl.push_str(&to_canonical_line(d).map_err(|e| IoError::schema(&at(&files.detections), e))?);
        jsonl.push('\n');
    }
    write_atomic(&at(&files.detections), jsonl.as_bytes())?;

    write_atomic(
        &at(&files.groundtruth),
        &csv_bytes(ds.ground_truth.iter().map(|e| GtRow {
            video_id: e.video_id.clone(),
            bib: e.bib.to_string(),
            frame_start: e.interval.start(),
            frame_end: e.interval.end(),
        })),
    )?;

    let mut roster = schema_line();
    for b in &ds.roster {
        roster.push_str(b.as_str());
        roster.push('\n');
    }
    write_atomic(&at(&files.roster), roster.as_bytes())?;

    write_atomic(
        &at(&files.finish_times),
        &csv_bytes(ds.finish_times.iter().map(|(b, &s)| FinishRow {
            bib: b.to_string(),
            finish_s: s,
        })),
    )?;

    write_json(&at(&files.track), &track_feature(&ds.track, &ds.name))?;
    write_json(
        &at(files.overrides.as_deref().expect("default has overrides")),
        &OverridesFile {
            schema_version: SCHEMA_VERSION,
            overrides: ds.overrides.clone(),
        },
    )?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: ds.name.clone(),
        embedding_dim: ds.embedding_dim,
        start_camera: ds.start_camera,
        files,
    };
    let path = dir.join("manifest.json");
    write_atomic(&path, to_canonical_json(&manifest).expect("serializes").as_bytes())?;
    Ok(path)
}

fn load_videos(dir: &Path, rel: &str) -> Result<Vec<VideoMeta>, IoError> {
    let path = dir.join(rel);
    let rows: Vec<(u64, VideoRow)> = read_csv(&path)?;
    rows.into_par_iter()
        .map(|(line, r)| {
            let bad = |m: String| IoError::parse(&path, line, m);
            let last_modified =
                Timestamp::parse_rfc3339(&r.last_modified).map_err(|e| bad(e.to_string()))?;
            let secs: f64 = r
                .duration_s
                .parse()
                .map_err(|_| bad(format!("duration_s {:?} is not a number", r.duration_s)))?;
            let fps = FrameRate::parse(&r.fps).map_err(|e| bad(e.to_string()))?;
            let gps_file = dir.join(&r.gps_trace);
            let (sidecar_id, trace) = parse_gps(&gps_file, &read_to_string(&gps_file)?)?;
            if sidecar_id != r.video_id {
                return Err(bad(format!(
                    "GPS sidecar {} belongs to video {sidecar_id:?}",
                    r.gps_trace
                )));
            }
            VideoMeta::new(
                r.video_id,
                r.camera_id,
                last_modified,
                (secs * 1000.0).round() as i64,
                fps,
                trace,
            )
            .map_err(|e| bad(e.to_string()))
        })
        .collect()
}

fn load_detections(path: &Path, manifest_dim: usize) -> Result<Vec<Detection>, IoError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));
    let (_, first) = lines
        .next()
        .ok_or_else(|| IoError::parse(path, 1, "empty file, expected a schema header"))?;
    let header: DetectionsHeader =
        serde_json::from_str(first).map_err(|e| IoError::parse(path, 1, e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(IoError::parse(
            path,
            1,
            format!("unsupported schema version {}", header.schema_version),
        ));
    }
    if header.embedding_dim != manifest_dim {
        return Err(IoError::parse(
            path,
            1,
            format!(
                "embedding_dim {} disagrees with manifest ({manifest_dim})",
                header.embedding_dim
            ),
        ));
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let d: Detection = serde_json::from_str(line).map_err(|e| IoError::parse(path, n, e))?;
        if let Some(e) = &d.embedding {
            if e.len() != manifest_dim {
                return Err(IoError::parse(
                    path,
                    n,
                    format!("embedding has dimension {}, expected {manifest_dim}", e.len()),
                ));
            }
        }
        out.push(d);
    }
    Ok(out)
}

fn parse_bib(path: &Path, line: u64, s: &str) -> Result<BibNumber, IoError> {
    BibNumber::parse(s).map_err(|e| IoError::parse(path, line, e))
}

fn load_groundtruth(path: &Path) -> Result<Vec<GroundTruthEntry>, IoError> {
    read_csv::<GtRow>(path)?
        .into_iter()
        .map(|(line, r)| {
            Ok(GroundTruthEntry {
                bib: parse_bib(path, line, &r.bib)?,
                interval: FrameInterval::new(r.frame_start, r.frame_end)
                    .map_err(|e| IoError::parse(path, line, e))?,
                video_id: r.video_id,
            })
        })
        .collect()
}

fn load_roster(path: &Path) -> Result<BTreeSet<BibNumber>, IoError> {
    let text = read_to_string(path)?;
    check_schema_line(path, &text)?;
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n = i as u64 + 1;
        if !out.insert(parse_bib(path, n, line)?) {
            return Err(IoError::parse(path, n, format!("duplicate bib {line}")));
        }
    }
    Ok(out)
}

fn load_finish_times(path: &Path) -> Result<BTreeMap<BibNumber, f64>, IoError> {
    let mut out = BTreeMap::new();
    for (line, r) in read_csv::<FinishRow>(path)? {
        if !(r.finish_s > 0.0 && r.finish_s.is_finite()) {
            return Err(IoError::parse(path, line, format!("finish_s {} not positive", r.finish_s)));
        }
        out.insert(parse_bib(path, line, &r.bib)?, r.finish_s);
    }
    Ok(out)
}

/// Reads and validates a dataset from its manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, IoError> {
    let manifest: Manifest = read_json(manifest_path)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(IoError::schema(
            manifest_path,
            format!("unsupported schema version {}", manifest.schema_version),
        ));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let f = &manifest.files;
    let at = |rel: &str| dir.join(rel);

    let ((videos, detections), ((ground_truth, roster), (finish_times, track))) = rayon::join(
        || {
            rayon::join(
                || load_videos(dir, &f.videos),
                || load_detections(&at(&f.detections), manifest.embedding_dim),
            )
        },
        || {
            rayon::join(
                || {
                    (
                        load_groundtruth(&at(&f.groundtruth)),
                        load_roster(&at(&f.roster)),
                    )
                },
                || {
                    let track = read_to_string(&at(&f.track))
                        .and_then(|t| parse_track(&at(&f.track), &t));
                    (load_finish_times(&at(&f.finish_times)), track)
                },
            )
        },
    );
    let overrides = match &f.overrides {
        Some(rel) => {
            let path = at(rel);
            let o: OverridesFile = read_json(&path)?;
            if o.schema_version != SCHEMA_VERSION {
                return Err(IoError::schema(
                    &path,
                    format!("unsupported schema version {}", o.schema_version),
                ));
            }
            o.overrides
        }
        None => Overrides::new(),
    };

    let ds = Dataset {
        name: manifest.name,
        embedding_dim: manifest.embedding_dim,
        start_camera: manifest.start_camera,
        videos: videos?,
        detections: detections?,
        ground_truth: ground_truth?,
        roster: roster?,
        finish_times: finish_times?,
        track: track?,
        overrides,
    };
    let report = ds.validate();
    if !report.is_empty() {
        return Err(IoError::Invalid(report.violations));
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duration_formatting() {
        assert_eq!(format_duration(35_440), "35.440");
        assert_eq!(format_duration(7), "0.007");
    }

    #[test]
    fn schema_line_is_required() {
        let p = Path::new("x.csv");
        assert!(check_schema_line(p, "# schema_version=1\nid\n").is_ok());
        assert!(matches!(
            check_schema_line(p, "id\n"),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(check_schema_line(p, "# schema_version=2\n").is_err());
    }
}
