//! End-to-end composition: GPS cleaning, identification, timelines, scoring.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::geo::{filter_trace, FilteredTrace, StrayFilterConfig};
use crate::ident::{
    accepted_spans, collect_gallery, filter_known_bibs, parse_grid, rebuild_round2,
    score_queries, sweep_threshold, Classification, Gallery, OutlierConfig, PairingRule,
    RebuildMode, ScoredQuery, SweepResult, TextRead,
};
use crate::metrics::{
    baseline_all, baseline_random, evaluate as score, gt_video_sets, spans_from_frames,
    DetectionSpans, EvalReport,
};
use crate::timeline::{
    build_timeline, runner_timestamp, RunnerSighting, RunnerTimeline, SightingSource,
    TimelineConfig,
};
use crate::Error;

pub const VARIANT_TEXT: &str = "text";
pub const VARIANT_REID1: &str = "reid1";
pub const VARIANT_REID2: &str = "reid2";
pub const VARIANT_BASE_ALL: &str = "base-all";
pub const VARIANT_BASE_RAND: &str = "base-rand";

#[derive(Debug, Clone, PartialEq)]
pub struct FuseConfig {
    pub outlier: OutlierConfig,
    /// Thresholds to sweep against ground truth; `None` keeps `outlier.threshold`.
    pub sweep: Option<Vec<f64>>,
    pub rounds: u8,
    pub rebuild: RebuildMode,
    pub pairing: PairingRule,
    pub stray: StrayFilterConfig,
    pub pass_gap_s: f64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            outlier: OutlierConfig::default(),
            sweep: Some(parse_grid("0:1:0.01").expect("valid grid")),
            rounds: 2,
            rebuild: RebuildMode::Merge,
            pairing: PairingRule::Containment,
            stray: StrayFilterConfig::default(),
            pass_gap_s: TimelineConfig::default().pass_gap_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub round: u8,
    pub gallery: Gallery,
    /// Neighbors actually used; smaller than configured when the gallery is.
    pub k: usize,
    pub threshold: f64,
    pub sweep: Option<SweepResult>,
    pub scored: Vec<ScoredQuery>,
}

impl RoundResult {
    pub fn classifications(&self) -> Vec<Classification> {
        self.scored.iter().map(|q| q.at(self.threshold)).collect()
    }

    pub fn spans(&self, ds: &Dataset) -> DetectionSpans {
        accepted_spans(&self.scored, &ds.detections, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseResult {
    pub reads: Vec<TextRead>,
    pub rounds: Vec<RoundResult>,
    pub traces: BTreeMap<String, FilteredTrace>,
    pub sightings: Vec<RunnerSighting>,
    pub timelines: Vec<RunnerTimeline>,
    pub warnings: Vec<String>,
}

impl FuseResult {
    pub fn final_round(&self) -> Option<&RoundResult> {
        self.rounds.last()
    }
}

/// Cleans every video's GPS trace, in parallel.
pub fn filter_traces(
    ds: &Dataset,
    stray: &StrayFilterConfig,
) -> Result<BTreeMap<String, FilteredTrace>, Error> {
    let empty = BTreeMap::new();
    ds.videos
        .par_iter()
        .map(|v| {
            let trace: Vec<_> = v.gps_trace.iter().map(|f| (f.timestamp, f.point)).collect();
            let overrides = ds.overrides.get(&v.video_id).unwrap_or(&empty);
            let filtered = filter_trace(&trace, &ds.track, stray, overrides)?;
            Ok((v.video_id.clone(), filtered))
        })
        .collect()
}

/// Text reads of known bibs as (bib, video) frame spans.
pub fn text_spans(ds: &Dataset, reads: &[TextRead]) -> DetectionSpans {
    spans_from_frames(reads.iter().map(|r| {
        let d = &ds.detections[r.detection];
        (r.bib.clone(), d.video_id.clone(), d.frame)
    }))
}

/// One sighting per (bib, video) at the last detected frame, placed at the
/// camera position nearest in time.
pub fn sightings_from_spans(
    ds: &Dataset,
    spans: &DetectionSpans,
    traces: &BTreeMap<String, FilteredTrace>,
    source: SightingSource,
    warnings: &mut Vec<String>,
) -> Result<Vec<RunnerSighting>, Error> {
    let mut out = Vec::new();
    for (bib, videos) in spans {
        for (video_id, span) in videos {
            let Some(meta) = ds.video(video_id) else {
                warnings.push(format!("bib {bib}: unknown video {video_id}"));
                continue;
            };
            let frame = span.end();
            let timestamp = runner_timestamp(meta, frame)?;
            let Some(pos) = traces.get(video_id).and_then(|t| t.position_at(timestamp)) else {
                warnings.push(format!(
                    "bib {bib}: video {video_id} has no usable GPS fix, sighting dropped"
                ));
                continue;
            };
            out.push(RunnerSighting {
                bib: bib.clone(),
                video_id: video_id.clone(),
                camera_id: meta.camera_id,
                frame,
                timestamp,
                camera_point: pos.point,
                arc_pos_m: pos.arc_pos_m,
                source,
            });
        }
    }
    Ok(out)
}

fn person_queries(ds: &Dataset) -> Vec<usize> {
    ds.detections
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_person() && d.embedding.is_some())
        .map(|(i, _)| i)
        .collect()
}

fn run_round(
    ds: &Dataset,
    gallery: Gallery,
    queries: &[usize],
    cfg: &FuseConfig,
    warnings: &mut Vec<String>,
) -> Result<RoundResult, Error> {
    let round = gallery.round();
    if gallery.is_empty() {
        warnings.push(format!("round {round}: empty gallery, no person detection identified"));
        return Ok(RoundResult {
            round,
            gallery,
            k: 0,
            threshold: cfg.outlier.threshold,
            sweep: None,
            scored: Vec::new(),
        });
    }
    let k = cfg.outlier.k.min(gallery.len());
    if k < cfg.outlier.k {
        warnings.push(format!(
            "round {round}: gallery has {} entries, using k = {k}",
            gallery.len()
        ));
    }
    let scored = score_queries(&ds.detections, queries, &gallery, k, cfg.outlier.metric)?;
    let (threshold, sweep) = match &cfg.sweep {
        Some(grid) if !ds.ground_truth.is_empty() => {
            let gt = gt_video_sets(&ds.ground_truth);
            let s = sweep_threshold(&scored, &ds.detections, &gt, grid)?;
            (s.best_threshold, Some(s))
        }
        Some(_) => {
            warnings.push(format!(
                "round {round}: no ground truth to sweep against, using threshold {}",
                cfg.outlier.threshold
            ));
            (cfg.outlier.threshold, None)
        }
        None => (cfg.outlier.threshold, None),
    };
    Ok(RoundResult {
        round,
        gallery,
        k,
        threshold,
        sweep,
        scored,
    })
}

/// Text reads → gallery → k-NN outlier rejection (optionally a second
/// round) → per-runner timelines from the accepted person detections.
pub fn fuse(ds: &Dataset, cfg: &FuseConfig) -> Result<FuseResult, Error> {
    cfg.outlier.validate()?;
    if !(1..=2).contains(&cfg.rounds) {
        return Err(Error::Config(format!("rounds must be 1 or 2, got {}", cfg.rounds)));
    }
    let mut warnings = Vec::new();
    let reads = filter_known_bibs(&ds.detections, &ds.roster);
    let build = collect_gallery(&ds.detections, &reads, ds.embedding_dim, cfg.pairing)?;
    warnings.extend(build.warnings);

    let queries = person_queries(ds);
    let mut rounds = vec![run_round(ds, build.gallery, &queries, cfg, &mut warnings)?];
    if cfg.rounds == 2 {
        let r1 = &rounds[0];
        match rebuild_round2(&r1.gallery, &r1.classifications(), &ds.detections, cfg.rebuild) {
            Ok(g2) => {
                let r2 = run_round(ds, g2, &queries, cfg, &mut warnings)?;
                rounds.push(r2);
            }
            Err(crate::ident::IdentError::NoInliers) => {
                warnings.push("round 2 skipped: no inliers in round 1".into());
            }
            Err(e) => return Err(e.into()),
        }
    }

    let traces = filter_traces(ds, &cfg.stray)?;
    let spans = rounds.last().expect("round 1 ran").spans(ds);
    let sightings =
        sightings_from_spans(ds, &spans, &traces, SightingSource::Reid, &mut warnings)?;

    let tl_cfg = TimelineConfig {
        start_camera: ds.start_camera,
        pass_gap_s: cfg.pass_gap_s,
    };
    let mut by_bib: BTreeMap<_, Vec<RunnerSighting>> = BTreeMap::new();
    for s in &sightings {
        by_bib.entry(s.bib.clone()).or_default().push(s.clone());
    }
    let track_len = ds.track.total_length_m();
    let builds: Vec<_> = by_bib
        .par_iter()
        .map(|(bib, list)| {
            build_timeline(bib, list, ds.finish_times.get(bib).copied(), track_len, &tl_cfg)
        })
        .collect::<Result<_, _>>()?;
    let mut timelines = Vec::with_capacity(builds.len());
    for b in builds {
        warnings.extend(b.warnings);
        timelines.push(b.timeline);
    }

    Ok(FuseResult {
        reads,
        rounds,
        traces,
        sightings,
        timelines,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baselines {
    /// Both baselines.
    #[default]
    Both,
    All,
    Random,
    None,
}

/// Reports for every variant: text-only, each re-id round, then baselines.
pub fn evaluate(
    ds: &Dataset,
    fused: &FuseResult,
    seed: u64,
    baselines: Baselines,
) -> Vec<EvalReport> {
    let gt = &ds.ground_truth;
    let mut out = vec![score(VARIANT_TEXT, &text_spans(ds, &fused.reads), gt)];
    for r in &fused.rounds {
        let name = if r.round == 1 { VARIANT_REID1 } else { VARIANT_REID2 };
        out.push(score(name, &r.spans(ds), gt));
    }
    if matches!(baselines, Baselines::Both | Baselines::All) {
        out.push(baseline_all(&ds.videos, &ds.roster, gt));
    }
    if matches!(baselines, Baselines::Both | Baselines::Random) {
        out.push(baseline_random(&ds.videos, &ds.roster, gt, seed));
    }
    out
}

/// Bibs with no gallery entry in the given round.
pub fn runners_without_gallery(ds: &Dataset, round: &RoundResult) -> BTreeSet<crate::types::BibNumber> {
    let labels = round.gallery.labels();
    ds.roster.difference(&labels).cloned().collect()
}
