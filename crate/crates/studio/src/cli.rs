//! `gaze-studio` subcommands. Exit status: 0 success, 2 bad input, 1 internal failure.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazestudio_core::attnmap::{downsample, DEFAULT_IOU_LEVEL, REFERENCE_DISPLAY_PX};
use gazestudio_core::net::{evaluate, extract_features, train, Example, Split};
use gazestudio_core::pipeline::{build_benchmark, segment, track_map, SegmentParams};
use gazestudio_core::segmentation::calibrate_threshold;
use gazestudio_core::synth::{generate, SplitName, SynthConfig};
use gazestudio_core::{KernelConfig, KlGrade};
use serde::Serialize;

use crate::checkpoint::{write_history, Checkpoint};
use crate::config::{config_path, ServiceConfig, TrainJob};
use crate::dataset::{load_dataset, write_corpus, Dataset};
use crate::gamap::{write_gamap, write_map_png};
use crate::stats::welch_t_test;
use crate::track::{load_track, load_track_dir, save_track, track_stem, with_suffix, write_atomic, META_SUFFIX};

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn invalid(e: impl Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn internal(e: impl Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "gaze-studio", version, about = "Gaze segmentation, attention maps and gaze-supervised training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus (images, tracks, labels, manifest).
    Generate(GenerateArgs),
    /// Filter one track down to its fixation windows.
    Segment(SegmentArgs),
    /// Render a track as a GAMAP1 attention map.
    Render(RenderArgs),
    /// Train the classifier from a job file.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator settings as JSON; unspecified fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Also copy this many grade-0 tracks into `<out>/healthy` for calibration.
    #[arg(long, default_value_t = 50)]
    pub healthy: usize,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long, default_value_t = 60)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

impl WindowArgs {
    fn params(&self) -> SegmentParams {
        SegmentParams { window: self.window, stride: self.stride, ..Default::default() }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// `.gaze.jsonl` file.
    #[arg(long)]
    pub track: PathBuf,
    /// Defaults to the `.meta.json` beside the track.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Directory of grade-0 track pairs.
    #[arg(long)]
    pub healthy_dir: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Stem for the filtered track pair; defaults to `<track>.filtered`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub track: PathBuf,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an 8-bit PNG of the map.
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// Render only fixation samples; needs `--healthy-dir`.
    #[arg(long)]
    pub processed: bool,
    #[arg(long)]
    pub healthy_dir: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Screen size (px) the image was read at; the kernel scales by image / display.
    #[arg(long, default_value_t = REFERENCE_DISPLAY_PX)]
    pub display_px: f64,
    /// Pool to the 16x16 feature grid instead of full image resolution.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the training, generator and filter-bank seeds.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset manifest.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long, default_value_t = DEFAULT_IOU_LEVEL)]
    pub iou_level: f64,
    /// Second checkpoint; adds a Welch t-test on per-image absolute errors.
    #[arg(long)]
    pub against: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Defaults to `$GAZE_STUDIO_CONFIG`, then `gaze-studio.json`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<std::net::SocketAddr>,
    /// Accepted for uniformity; the service draws no random numbers of its own.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Render(a) => cmd_render(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Serve(a) => cmd_serve(a),
    }
}

fn read_json_file<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&raw).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json_file(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.n_train = a.n_train.unwrap_or(cfg.n_train);
    cfg.n_val = a.n_val.unwrap_or(cfg.n_val);
    cfg.n_test = a.n_test.unwrap_or(cfg.n_test);
    if cfg.image_size < 16 || cfg.samples_per_track < 2 {
        return Err(invalid("image_size must be at least 16 and samples_per_track at least 2"));
    }
    let corpus = generate(&cfg);
    let manifest = write_corpus(&corpus, &a.out).map_err(internal)?;
    let healthy = a.out.join("healthy");
    for item in corpus.items.iter().filter(|i| i.grade.value() == 0).take(a.healthy) {
        save_track(&healthy.join(&item.id), &item.track).map_err(internal)?;
    }
    println!("wrote {} entries to {}", manifest.entries.len(), a.out.display());
    Ok(())
}

fn meta_path(track: &Path, meta: Option<&PathBuf>) -> PathBuf {
    meta.cloned().unwrap_or_else(|| with_suffix(&track_stem(track), META_SUFFIX))
}

fn healthy_threshold(dir: &Path, params: &SegmentParams) -> Result<f64, CliError> {
    let tracks = load_track_dir(dir).map_err(invalid)?;
    calibrate_threshold(&tracks, &params.fit, params.window, params.stride).map_err(|e| invalid(format!("calibration: {e}")))
}

#[derive(Serialize)]
struct SegmentReport {
    gamma_series: Vec<f64>,
    gamma_th: f64,
    kept_fraction: f64,
}

fn cmd_segment(a: SegmentArgs) -> Result<(), CliError> {
    let track = load_track(&a.track, &meta_path(&a.track, a.meta.as_ref())).map_err(invalid)?;
    let params = a.window.params();
    let gamma_th = healthy_threshold(&a.healthy_dir, &params)?;
    let seg = segment(&track, &params, gamma_th).map_err(invalid)?;
    let out = a.out.unwrap_or_else(|| with_suffix(&track_stem(&a.track), ".filtered"));
    save_track(&out, &seg.filtered).map_err(internal)?;
    let report = SegmentReport { gamma_series: seg.levels.gammas().collect(), gamma_th, kept_fraction: seg.mask.kept_fraction() };
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    match a.report {
        Some(p) => write_atomic(&p, &json).map_err(internal)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<(), CliError> {
    let track = load_track(&a.track, &meta_path(&a.track, a.meta.as_ref())).map_err(invalid)?;
    if !(a.display_px > 0.0) {
        return Err(invalid("display-px must be positive"));
    }
    let m = track.meta();
    let kernel = KernelConfig::default().for_display(m.image_width.max(m.image_height) as f64, a.display_px);
    let track = if a.processed {
        let dir = a.healthy_dir.as_ref().ok_or_else(|| invalid("--processed needs --healthy-dir"))?;
        let params = a.window.params();
        let th = healthy_threshold(dir, &params)?;
        segment(&track, &params, th).map_err(invalid)?.filtered
    } else {
        track
    };
    let mut map = track_map(&track, &kernel);
    if a.grid {
        map = downsample(&map, gazestudio_core::net::FEATURE_GRID, gazestudio_core::net::FEATURE_GRID);
    }
    write_gamap(&a.out, &map).map_err(internal)?;
    if let Some(p) = &a.png {
        write_map_png(p, &map).map_err(internal)?;
    }
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let mut job = TrainJob::load(&a.config).map_err(invalid)?;
    if let Some(s) = a.seed {
        job.train.seed = s;
        job.synth.seed = s;
        job.benchmark.filter_seed = s;
    }
    let loaded;
    let corpus;
    let records = match &job.data {
        Some(path) => {
            loaded = load_dataset(path).map_err(invalid)?;
            loaded.records()
        }
        None => {
            corpus = generate(&job.synth);
            corpus.records()
        }
    };
    let bench = build_benchmark(&records, &job.benchmark).map_err(invalid)?;
    let (params, history) = train(&bench.train, &bench.val, &job.train).map_err(invalid)?;
    let config = serde_json::to_value(&job).expect("job serializes");
    let ck = Checkpoint { params, filter_seed: job.benchmark.filter_seed, config };
    ck.save(&job.checkpoint).map_err(internal)?;
    write_history(&job.history, &history).map_err(internal)?;
    let gazed = bench.train.iter().filter(|e| e.gaze.is_some()).count();
    println!("gamma_th={:.4} train={} gaze={} val={} test={}", bench.gamma_th, bench.train.len(), gazed, bench.val.len(), bench.test.len());
    for split in [Split::Train, Split::Validation] {
        if let Some(r) = history.last(split) {
            println!("epoch {} {}: ACC={:.3} MAE={:.3} CE={:.4} AC={:.4}", r.epoch, split.as_str(), r.acc, r.mae, r.ce, r.ac);
        }
    }
    if !bench.test.is_empty() {
        let ev = evaluate(&ck.params, &bench.test, DEFAULT_IOU_LEVEL).map_err(internal)?;
        println!("test: ACC={:.3} MAE={:.3} IoU={}", ev.acc, ev.mae, fmt_iou(ev.mean_iou));
    }
    Ok(())
}

fn fmt_iou(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

/// Examples of one split, featurized with the checkpoint's filter bank.
fn examples(data: &Dataset, split: SplitArg, ck: &Checkpoint) -> Result<Vec<Example>, CliError> {
    let bank = ck.filter_bank();
    let wanted = |s: SplitName| match split {
        SplitArg::All => true,
        SplitArg::Train => s == SplitName::Train,
        SplitArg::Val => s == SplitName::Val,
        SplitArg::Test => s == SplitName::Test,
    };
    data.items
        .iter()
        .filter(|i| wanted(i.entry.split()))
        .map(|i| {
            Ok(Example {
                features: extract_features(&i.image, &bank).map_err(|e| invalid(format!("{}: {e}", i.entry.image_id)))?,
                grade: i.entry.grade,
                gaze: None,
                boxes: i.entry.boxes.clone(),
                image_width: i.image.width,
                image_height: i.image.height,
            })
        })
        .collect()
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let ck = Checkpoint::load(&a.checkpoint).map_err(invalid)?;
    if ck.params.classes() != KlGrade::COUNT {
        return Err(invalid(format!("checkpoint has {} classes, expected {}", ck.params.classes(), KlGrade::COUNT)));
    }
    let data = load_dataset(&a.data).map_err(invalid)?;
    let set = examples(&data, a.split, &ck)?;
    if set.is_empty() {
        return Err(invalid("selected split is empty"));
    }
    let ev = evaluate(&ck.params, &set, a.iou_level).map_err(invalid)?;
    println!("N={} ACC={:.3} MAE={:.3} IoU={}", ev.n, ev.acc, ev.mae, fmt_iou(ev.mean_iou));
    let counts = ev.class_counts();
    let correct = ev.class_correct();
    for g in 0..KlGrade::COUNT {
        println!("grade {g}: {}/{}", correct[g], counts[g]);
    }
    if let Some(other) = &a.against {
        let ck2 = Checkpoint::load(other).map_err(invalid)?;
        let set2 = examples(&data, a.split, &ck2)?;
        let ev2 = evaluate(&ck2.params, &set2, a.iou_level).map_err(invalid)?;
        println!("against: ACC={:.3} MAE={:.3} IoU={}", ev2.acc, ev2.mae, fmt_iou(ev2.mean_iou));
        match welch_t_test(&ev.abs_errors, &ev2.abs_errors) {
            Some(w) => println!("welch: t={:.4} df={:.1} p={:.4e}", w.t, w.df, w.p),
            None => println!("welch: n/a"),
        }
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let path = config_path(a.config.as_deref());
    let mut cfg = ServiceConfig::load(&path).map_err(invalid)?;
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    let state = crate::service::AppState::new(cfg).map_err(invalid)?;
    let rt = tokio::runtime::Runtime::new().map_err(internal)?;
    rt.block_on(crate::service::serve(state)).map_err(internal)
}
