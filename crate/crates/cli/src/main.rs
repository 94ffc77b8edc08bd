use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use racetrace::geo::StrayFilterConfig;
use racetrace::ident::{parse_grid, DistanceMetric, OutlierConfig, RebuildMode};
use racetrace::io::{
    export_report, export_summary, export_viewer_bundle, geojson, load_dataset, write_dataset,
    write_json, IoError, ViewerBundle,
};
use racetrace::pipeline::{self, Baselines, FuseConfig, FuseResult};
use racetrace::sim::{generate, SimConfig};
use racetrace::Dataset;

#[derive(Parser)]
#[command(name = "racetrace", version, about = "Runner timelines from race footage metadata")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic race dataset.
    Simulate(SimulateArgs),
    /// Snap and stray-filter camera GPS traces.
    FilterGps(FilterArgs),
    /// Identify runners and build their timelines.
    Fuse(FuseArgs),
    /// Score text-only, re-id and baseline predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Write the viewer bundle.
    Export(ExportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 127)]
    runners: usize,
    #[arg(long, default_value_t = 9)]
    cameras: usize,
    #[arg(long, default_value_t = 1)]
    videos_per_camera: usize,
    #[arg(long, default_value_t = 32)]
    embedding_dim: usize,
    /// Perfect reads, exact embeddings, no distractors.
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    occlusion: Option<f64>,
    #[arg(long)]
    false_text: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    distractors: Option<usize>,
    /// Runner indices whose bibs are never read (comma separated).
    #[arg(long, value_delimiter = ',')]
    unreadable: Vec<usize>,
    #[arg(long, default_value = "sim")]
    name: String,
}

#[derive(Args)]
struct GpsArgs {
    /// Stray points form an apex angle below this (degrees).
    #[arg(long, default_value_t = 30.0)]
    min_angle: f64,
    /// Stray points also lie farther than this from both neighbors (meters).
    #[arg(long, default_value_t = 50.0)]
    max_dist: f64,
}

impl GpsArgs {
    fn config(&self) -> Result<StrayFilterConfig> {
        Ok(StrayFilterConfig::new(self.min_angle, self.max_dist)?)
    }
}

#[derive(Args)]
struct FilterArgs {
    /// Dataset manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    gps: GpsArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Distance {
    Cosine,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    All,
    Random,
    None,
}

#[derive(Args)]
struct FuseOpts {
    /// Dataset manifest.json.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Distance::Cosine)]
    distance: Distance,
    /// Fixed outlier threshold; disables the sweep.
    #[arg(long, conflicts_with = "sweep")]
    threshold: Option<f64>,
    /// Threshold grid `start:stop:step` swept against ground truth.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    rounds: u8,
    /// Second-round gallery from accepted inliers only.
    #[arg(long)]
    inliers_only: bool,
    #[command(flatten)]
    gps: GpsArgs,
    /// Also write the viewer bundle to `<out>/viewer`.
    #[arg(long)]
    viewer_bundle: bool,
    /// Viewer position sampling interval in seconds.
    #[arg(long, default_value_t = 1.0)]
    sample_interval: f64,
}

impl FuseOpts {
    fn config(&self) -> Result<FuseConfig> {
        let metric = match self.distance {
            Distance::Cosine => DistanceMetric::Cosine,
            Distance::Euclidean => DistanceMetric::Euclidean,
        };
        let base = OutlierConfig::default();
        let (threshold, sweep) = match (&self.threshold, &self.sweep) {
            (Some(t), _) => (*t, None),
            (None, Some(s)) => (base.threshold, Some(parse_grid(s)?)),
            (None, None) => (base.threshold, Some(parse_grid("0:1:0.01")?)),
        };
        Ok(FuseConfig {
            outlier: OutlierConfig {
                k: self.k,
                metric,
                threshold,
            },
            sweep,
            rounds: self.rounds,
            rebuild: if self.inliers_only {
                RebuildMode::InliersOnly
            } else {
                RebuildMode::Merge
            },
            stray: self.gps.config()?,
            ..FuseConfig::default()
        })
    }
}

#[derive(Args)]
struct FuseArgs {
    #[command(flatten)]
    opts: FuseOpts,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    opts: FuseOpts,
    /// Which baselines to score (default: both).
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// Seed for the random baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    opts: FuseOpts,
}

fn load(manifest: &Path) -> Result<Dataset> {
    let ds = load_dataset(manifest)?;
    eprintln!(
        "loaded {}: {} videos, {} detections, {} runners",
        ds.name,
        ds.videos.len(),
        ds.detections.len(),
        ds.roster.len()
    );
    Ok(ds)
}

fn run_fuse(opts: &FuseOpts) -> Result<(Dataset, FuseResult)> {
    let cfg = opts.config()?;
    let ds = load(&opts.manifest)?;
    let fused = pipeline::fuse(&ds, &cfg)?;
    for w in &fused.warnings {
        eprintln!("warning: {w}");
    }
    for r in &fused.rounds {
        eprintln!(
            "round {}: gallery {} entries, k = {}, threshold {}",
            r.round,
            r.gallery.len(),
            r.k,
            r.threshold
        );
    }
    Ok((ds, fused))
}

fn write_bundle(ds: &Dataset, fused: &FuseResult, dir: &Path, interval_s: f64) -> Result<()> {
    let bundle = ViewerBundle::build(ds, fused, interval_s)?;
    export_viewer_bundle(dir, &bundle, &ds.track)?;
    eprintln!("viewer bundle: {} runners in {}", bundle.runners.len(), dir.display());
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let base = if a.noiseless {
        SimConfig::noiseless(a.seed)
    } else {
        SimConfig {
            seed: a.seed,
            ..SimConfig::default()
        }
    };
    let cfg = SimConfig {
        n_runners: a.runners,
        n_cameras: a.cameras,
        videos_per_camera: a.videos_per_camera,
        embedding_dim: a.embedding_dim,
        digit_occlusion_prob: a.occlusion.unwrap_or(base.digit_occlusion_prob),
        false_text_prob: a.false_text.unwrap_or(base.false_text_prob),
        embedding_noise_sigma: a.sigma.unwrap_or(base.embedding_noise_sigma),
        n_distractors: a.distractors.unwrap_or(base.n_distractors),
        unreadable_runners: a.unreadable.iter().copied().collect(),
        ..base
    };
    let out = generate(&cfg)?;
    for w in &out.world.warnings {
        eprintln!("warning: {w}");
    }
    let ds = Dataset::from_sim(a.name.clone(), out);
    let manifest = write_dataset(&a.out, &ds)?;
    eprintln!(
        "wrote {} videos, {} detections to {}",
        ds.videos.len(),
        ds.detections.len(),
        manifest.display()
    );
    Ok(())
}

fn cmd_filter_gps(a: &FilterArgs) -> Result<()> {
    let cfg = a.gps.config()?;
    let ds = load(&a.manifest)?;
    let traces = pipeline::filter_traces(&ds, &cfg)?;
    let mut per_camera = std::collections::BTreeMap::<u32, (usize, usize)>::new();
    for v in &ds.videos {
        let t = &traces[&v.video_id];
        let e = per_camera.entry(v.camera_id).or_default();
        e.0 += t.raw.len();
        e.1 += t.flagged.len();
    }
    let counts: Vec<_> = per_camera
        .iter()
        .map(|(cam, (fixes, flagged))| json!({"camera_id": cam, "fixes": fixes, "flagged": flagged}))
        .collect();
    for (cam, (fixes, flagged)) in &per_camera {
        eprintln!("camera {cam}: {flagged} of {fixes} fixes flagged");
    }
    write_json(
        &a.out.join("trajectories.geojson"),
        &geojson::trajectories(&ds.videos, &traces),
    )?;
    write_json(&a.out.join("flagged.json"), &json!({ "cameras": counts }))?;
    Ok(())
}

fn write_fuse_outputs(out: &Path, fused: &FuseResult) -> Result<()> {
    let rounds: Vec<_> = fused
        .rounds
        .iter()
        .map(|r| {
            json!({
                "round": r.round,
                "gallery_size": r.gallery.len(),
                "gallery_bibs": r.gallery.labels().len(),
                "k": r.k,
                "threshold": r.threshold,
                "accepted": r.scored.iter().filter(|q| q.accepted_at(r.threshold)).count(),
                "sweep": r.sweep,
            })
        })
        .collect();
    write_json(&out.join("rounds.json"), &rounds)?;
    for r in &fused.rounds {
        write_json(
            &out.join(format!("classifications_round{}.json", r.round)),
            &r.classifications(),
        )?;
    }
    write_json(&out.join("sightings.json"), &fused.sightings)?;
    write_json(&out.join("timelines.json"), &fused.timelines)?;
    write_json(&out.join("warnings.json"), &fused.warnings)?;
    Ok(())
}

fn cmd_fuse(a: &FuseArgs) -> Result<()> {
    let (ds, fused) = run_fuse(&a.opts)?;
    write_fuse_outputs(&a.opts.out, &fused)?;
    eprintln!("{} timelines", fused.timelines.len());
    if a.opts.viewer_bundle {
        write_bundle(&ds, &fused, &a.opts.out.join("viewer"), a.opts.sample_interval)?;
    }
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let (ds, fused) = run_fuse(&a.opts)?;
    if ds.ground_truth.is_empty() {
        bail!("dataset {} has no ground truth to evaluate against", ds.name);
    }
    let baselines = match a.baseline {
        None => Baselines::Both,
        Some(BaselineArg::All) => Baselines::All,
        Some(BaselineArg::Random) => Baselines::Random,
        Some(BaselineArg::None) => Baselines::None,
    };
    let reports = pipeline::evaluate(&ds, &fused, a.seed, baselines);
    for r in &reports {
        export_report(r, &a.opts.out)?;
        eprintln!(
            "{:>9}: R {:6.2}  P {:6.2}  F1 {:6.2}  mIoU {:6.2}",
            r.variant,
            r.macro_recall * 100.0,
            r.macro_precision * 100.0,
            r.macro_f1 * 100.0,
            r.miou * 100.0
        );
    }
    export_summary(&reports, &a.opts.out)?;
    if a.opts.viewer_bundle {
        write_bundle(&ds, &fused, &a.opts.out.join("viewer"), a.opts.sample_interval)?;
    }
    Ok(())
}

fn cmd_export(a: &ExportArgs) -> Result<()> {
    let (ds, fused) = run_fuse(&a.opts)?;
    write_bundle(&ds, &fused, &a.opts.out, a.opts.sample_interval)
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(e) = e.downcast_ref::<IoError>() {
        return io_kind(e);
    }
    match e.downcast_ref::<racetrace::Error>() {
        Some(racetrace::Error::Io(e)) => io_kind(e),
        Some(racetrace::Error::Config(_)) => "config",
        Some(racetrace::Error::Ident(_)) => "ident",
        Some(racetrace::Error::Geo(_)) => "geo",
        Some(racetrace::Error::Timeline(_)) => "timeline",
        Some(racetrace::Error::Sim(_)) => "config",
        Some(_) => "data",
        None if e.downcast_ref::<racetrace::ident::IdentError>().is_some() => "config",
        None if e.downcast_ref::<racetrace::geo::GeoError>().is_some() => "config",
        None if e.downcast_ref::<racetrace::sim::SimError>().is_some() => "config",
        None => "error",
    }
}

fn io_kind(e: &IoError) -> &'static str {
    match e {
        IoError::Io { .. } => "io",
        IoError::Parse { .. } => "parse",
        IoError::Schema { .. } => "schema",
        IoError::Invalid(_) => "invalid_dataset",
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::FilterGps(a) => cmd_filter_gps(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Export(a) => cmd_export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            let body = json!({"error": {"kind": error_kind(&e), "message": e.to_string(), "chain": chain}});
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
