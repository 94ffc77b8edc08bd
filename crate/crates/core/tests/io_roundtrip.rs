use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use racetrace::geo::snap_to_track;
use racetrace::io::{
    export_report, export_viewer_bundle, load_dataset, load_report, load_viewer_bundle,
    write_dataset, IoError, ViewerBundle,
};
use racetrace::pipeline::{self, Baselines, FuseConfig};
use racetrace::sim::{generate, synthetic_course, SimConfig};
use racetrace::track::Track;
use racetrace::types::{BibNumber, FrameInterval, FrameRate, GroundTruthEntry, Timestamp, VideoMeta};
use racetrace::Dataset;

fn small(seed: u64) -> SimConfig {
    SimConfig {
        n_runners: 12,
        n_cameras: 4,
        n_distractors: 20,
        ..SimConfig {
            seed,
            ..SimConfig::default()
        }
    }
}

fn sim_dataset(cfg: &SimConfig) -> Dataset {
    Dataset::from_sim("t", generate(cfg).unwrap())
}

#[test]
fn dataset_survives_write_and_load() {
    let ds = sim_dataset(&small(4));
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back.videos, ds.videos);
    assert_eq!(back.detections, ds.detections);
    assert_eq!(back.ground_truth, ds.ground_truth);
    assert_eq!(back.roster, ds.roster);
    assert_eq!(back.finish_times, ds.finish_times);
    assert_eq!(back.track, ds.track);
    assert_eq!(back, ds);

    // rewriting the loaded copy reproduces every file byte for byte
    let dir2 = tempfile::tempdir().unwrap();
    write_dataset(dir2.path(), &back).unwrap();
    for f in ["videos.csv", "detections.jsonl", "groundtruth.csv", "roster.txt", "finish_times.csv", "track.geojson", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(dir2.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

fn rewrite_line(path: &Path, line: usize, f: impl FnOnce(&str) -> String) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    lines[line - 1] = f(&lines[line - 1]);
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

#[test]
fn wrong_embedding_dimension_reports_its_line() {
    let ds = sim_dataset(&small(5));
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    let path = dir.path().join("detections.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    // first person detection at or after line 7
    let line = text
        .lines()
        .enumerate()
        .skip(6)
        .find(|(_, l)| l.contains("\"embedding\":["))
        .map(|(i, _)| i + 1)
        .unwrap();
    rewrite_line(&path, line, |l| l.replacen("\"embedding\":[", "\"embedding\":[0.5,", 1));
    match load_dataset(&manifest) {
        Err(IoError::Parse { line: l, message, .. }) => {
            assert_eq!(l as usize, line);
            assert!(message.contains("dimension"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn seventh_line_dimension_error() {
    let ds = sim_dataset(&small(6));
    let persons: Vec<_> = ds.detections.iter().filter(|d| d.is_person()).take(8).cloned().collect();
    let ds = Dataset {
        detections: persons,
        ..ds
    };
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    let path = dir.path().join("detections.jsonl");
    rewrite_line(&path, 7, |l| l.replacen("\"embedding\":[", "\"embedding\":[0.5,", 1));
    let err = load_dataset(&manifest).unwrap_err();
    assert!(matches!(err, IoError::Parse { line: 7, .. }), "{err}");
    assert!(err.to_string().contains(":7"), "{err}");
}

fn bib(s: &str) -> BibNumber {
    BibNumber::parse(s).unwrap()
}

#[test]
fn groundtruth_row_is_read_verbatim() {
    let track = Track::new(synthetic_course(2000.0)).unwrap();
    let video = VideoMeta::new(
        "vid3",
        3,
        Timestamp::parse_rfc3339("2019-09-29T09:30:20Z").unwrap(),
        20_000,
        FrameRate::new(30, 1).unwrap(),
        Vec::new(),
    )
    .unwrap();
    let ds = Dataset {
        name: "hand".into(),
        embedding_dim: 4,
        start_camera: None,
        videos: vec![video],
        detections: Vec::new(),
        ground_truth: vec![GroundTruthEntry {
            video_id: "vid3".into(),
            bib: bib("156"),
            interval: FrameInterval::new(98, 232).unwrap(),
        }],
        roster: [bib("156")].into_iter().collect(),
        finish_times: Default::default(),
        track,
        overrides: Default::default(),
    };
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    let csv = fs::read_to_string(dir.path().join("groundtruth.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "vid3,156,98,232"), "{csv}");
    assert_eq!(load_dataset(&manifest).unwrap(), ds);
}

#[test]
fn missing_schema_line_is_refused() {
    let ds = sim_dataset(&small(7));
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    rewrite_line(&dir.path().join("groundtruth.csv"), 1, |_| "video_id,bib,frame_start,frame_end".into());
    assert!(matches!(load_dataset(&manifest), Err(IoError::Parse { line: 1, .. })));
}

#[test]
fn ground_truth_outside_the_video_fails_validation() {
    let ds = sim_dataset(&small(8));
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(dir.path(), &ds).unwrap();
    rewrite_line(&dir.path().join("groundtruth.csv"), 3, |l| {
        let mut parts: Vec<&str> = l.split(',').collect();
        parts[3] = "99999999";
        parts.join(",")
    });
    assert!(matches!(load_dataset(&manifest), Err(IoError::Invalid(v)) if !v.is_empty()));
}

fn fused(ds: &Dataset) -> racetrace::pipeline::FuseResult {
    pipeline::fuse(ds, &FuseConfig::default()).unwrap()
}

#[test]
fn reports_round_trip_and_list_every_runner() {
    let ds = sim_dataset(&small(9));
    let f = fused(&ds);
    let reports = pipeline::evaluate(&ds, &f, 0, Baselines::Both);
    let names: Vec<&str> = reports.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(names, ["text", "reid1", "reid2", "base-all", "base-rand"]);

    let dir = tempfile::tempdir().unwrap();
    for r in &reports {
        let (json, csv) = export_report(r, dir.path()).unwrap();
        assert_eq!(&load_report(&json).unwrap(), r);

        let text = fs::read_to_string(csv).unwrap();
        let rows: Vec<Vec<String>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(str::to_owned).collect())
            .collect();
        assert_eq!(rows.len(), r.m);
        let f1: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(f1.windows(2).all(|w| w[0] >= w[1]));
        let bibs: BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
        assert_eq!(bibs.len(), r.m);
    }
}

#[test]
fn viewer_bundle_round_trips_and_stays_on_course() {
    let ds = sim_dataset(&SimConfig {
        n_runners: 15,
        n_cameras: 5,
        ..SimConfig::noiseless(10)
    });
    let f = fused(&ds);
    let bundle = ViewerBundle::build(&ds, &f, 1.0).unwrap();
    assert_eq!(bundle.runners.len(), 15);

    let dir = tempfile::tempdir().unwrap();
    export_viewer_bundle(dir.path(), &bundle, &ds.track).unwrap();
    let (back, track) = load_viewer_bundle(dir.path()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(track.points().len(), ds.track.points().len());

    for r in &bundle.runners {
        assert!(!r.samples.is_empty());
        assert!(r.samples.windows(2).all(|w| w[0][0] < w[1][0]));
        for s in &r.samples {
            let p = racetrace::types::GeoPoint::new(s[2], s[1]).unwrap();
            assert!(snap_to_track(p, &ds.track).distance_m < 1.0);
        }
        let wp_times: BTreeSet<i64> = r.waypoints.iter().map(|w| w.t_ms).collect();
        let sample_times: BTreeSet<i64> = r.samples.iter().map(|s| s[0] as i64).collect();
        assert!(wp_times.is_subset(&sample_times));
        // perfect identification: detected spans are the true spans
        assert!(!r.strips.is_empty());
        for s in &r.strips {
            assert_eq!(s.det, s.gt, "{} in {}", r.bib, s.video_id);
            assert_eq!(s.source, "reid2");
        }
    }
}

#[test]
fn no_timelines_means_no_runners() {
    let cfg = SimConfig {
        n_runners: 5,
        n_cameras: 3,
        unreadable_runners: (0..5).collect(),
        ..SimConfig::noiseless(12)
    };
    let ds = sim_dataset(&cfg);
    let f = fused(&ds);
    assert!(f.timelines.is_empty());
    let bundle = ViewerBundle::build(&ds, &f, 1.0).unwrap();
    assert!(bundle.runners.is_empty());
    assert_eq!(bundle.start_ms, None);
    assert_eq!(bundle.cameras.len(), 3);
}
