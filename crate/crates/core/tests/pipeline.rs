use std::collections::BTreeMap;

use racetrace::pipeline::{self, FuseConfig};
use racetrace::sim::{generate, SimConfig};
use racetrace::types::BibNumber;
use racetrace::Dataset;

#[test]
fn noiseless_round_two_extends_round_one_with_true_labels() {
    let out = generate(&SimConfig {
        n_runners: 30,
        n_cameras: 5,
        ..SimConfig::noiseless(21)
    })
    .unwrap();
    let ds = Dataset::from_sim("t", out);
    let fused = pipeline::fuse(&ds, &FuseConfig::default()).unwrap();
    let (r1, r2) = (&fused.rounds[0], &fused.rounds[1]);
    assert!(r2.gallery.len() > r1.gallery.len());
    assert_eq!(&r2.gallery.entries()[..r1.gallery.len()], r1.gallery.entries());

    // each simulated person keeps one bounding-box lane, so lanes identify them
    let mut lane_bib: BTreeMap<u64, &BibNumber> = BTreeMap::new();
    for e in r1.gallery.entries() {
        let d = &ds.detections[e.source.detection.unwrap()];
        lane_bib.insert(d.bbox.unwrap().x as u64, &e.bib);
    }
    for e in &r2.gallery.entries()[r1.gallery.len()..] {
        let d = &ds.detections[e.source.detection.unwrap()];
        assert_eq!(lane_bib[&(d.bbox.unwrap().x as u64)], &e.bib);
    }
}

#[test]
fn second_round_threshold_is_tighter() {
    let mut tighter = 0;
    for seed in 1..=5 {
        let ds = Dataset::from_sim(
            "t",
            generate(&SimConfig {
                seed,
                ..SimConfig::default()
            })
            .unwrap(),
        );
        let fused = pipeline::fuse(&ds, &FuseConfig::default()).unwrap();
        let (t1, t2) = (fused.rounds[0].threshold, fused.rounds[1].threshold);
        eprintln!("seed {seed}: round 1 threshold {t1}, round 2 threshold {t2}");
        tighter += (t2 < t1) as usize;
    }
    assert!(tighter >= 4, "round 2 tighter on only {tighter}/5 seeds");
}

#[test]
fn noiseless_timelines_match_simulated_passes() {
    let out = generate(&SimConfig {
        n_runners: 40,
        n_cameras: 9,
        ..SimConfig::noiseless(42)
    })
    .unwrap();
    let world = out.world.clone();
    let ds = Dataset::from_sim("t", out);
    let fused = pipeline::fuse(&ds, &FuseConfig::default()).unwrap();
    assert_eq!(fused.timelines.len(), 40);

    let half_frame_ms = 1000.0 / (2.0 * 30.0);
    for tl in &fused.timelines {
        // start, one waypoint per camera, finish
        assert_eq!(tl.waypoints.len(), 11, "bib {}", tl.bib);
        assert!(tl.waypoints.windows(2).all(|w| w[0].timestamp < w[1].timestamp));

        let runner = world.runners.iter().find(|r| r.bib == tl.bib).unwrap();
        for (wp, pass) in tl.waypoints[1..10].iter().zip(&runner.passes) {
            let truth = world.pass_timestamp(pass).millis();
            let err = (wp.timestamp.millis() - truth).abs() as f64;
            assert!(err <= half_frame_ms + 1.0, "bib {} camera {}: off by {err} ms", tl.bib, pass.camera_id);
        }
        let finish = tl.waypoints.last().unwrap();
        assert_eq!(
            finish.timestamp.millis(),
            world.start.millis() + (runner.finish_duration_s * 1000.0).round() as i64
        );
        assert!((finish.arc_pos_m - ds.track.total_length_m()).abs() < 1e-9);
    }
}
