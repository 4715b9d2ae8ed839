//! `probeshake` command-line front end. [`run`] parses argv, executes one
//! subcommand and returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (for `detect`: verdict real) |
//! | 1 | usage error |
//! | 2 | I/O or validation error |
//! | 3 | `detect` verdict fake |

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use probeshake_core::classify::{self, metrics, Optimizer, Provenance};
use probeshake_core::features::Normalize;
use probeshake_core::io::{self, ClipPaths};
use probeshake_core::pipeline::{self, ClipAnalysis};
use probeshake_core::simulate::{self as corpus, CorpusConfig};
use probeshake_core::{
    ClipInputs, DetectConfig, Error, FeatureVector, FrameSequence, ImuTrace, LabeledDataset, LandmarkSet, MaskMode, StabilizeMode,
    TrainConfig, Variant, Verdict, VibrationPattern,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_FAKE: i32 = 3;

/// Caps the worker pool; `0` or unset means one worker per core.
pub const THREADS_ENV: &str = "PROBESHAKE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "probeshake", version, about = "Active vibration-probe deepfake detection on video clips")]
#[command(after_help = "Exit codes: 0 ok / real, 1 usage error, 2 I/O or validation error, 3 fake verdict.\n\
Environment: PROBESHAKE_THREADS caps the worker count (0 = auto).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Simulate(SimulateArgs),
    /// Write per-region feature vectors for one clip as JSON.
    Extract(ExtractArgs),
    /// Train a classifier on one or more corpora.
    Train(TrainArgs),
    /// Classify one clip; exit 0 for real, 3 for fake.
    Detect(DetectArgs),
    /// Score a labeled corpus with a trained model.
    Evaluate(EvaluateArgs),
    /// Print the POS of a clip against its probe pattern.
    Pos(PosArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StabilizeArg {
    None,
    Expand,
    Imu,
    Centroid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MaskArg {
    Energy,
    Count,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    Mean,
    Log,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Nn2,
    Logistic,
    Knn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Gd,
    Adam,
}

/// Feature and stabilization settings shared by every command that reads clips.
#[derive(Debug, Args)]
struct FeatureArgs {
    /// Tremor compensation applied to the selected regions.
    #[arg(long, value_enum, default_value = "none")]
    stabilize: StabilizeArg,
    /// Number of regions (odd).
    #[arg(long, default_value_t = probeshake_core::features::DEFAULT_REGION_COUNT)]
    regions: usize,
    /// Side of each square region in pixels.
    #[arg(long, default_value_t = probeshake_core::features::DEFAULT_REGION_SIZE)]
    region_size: usize,
    /// Ideal-spectrum bin selection: 80% magnitude coverage or 80% of bins.
    #[arg(long, value_enum, default_value = "energy")]
    mask_mode: MaskArg,
    /// Scaling of each variance sequence before filtering.
    #[arg(long, value_enum, default_value = "log")]
    normalize: NormalizeArg,
    /// Region side used by `--stabilize expand`.
    #[arg(long, default_value_t = probeshake_core::stabilize::DEFAULT_EXPANDED_SIZE)]
    expand_size: usize,
    /// Assumed camera-to-face distance for `--stabilize imu`, in meters.
    #[arg(long, default_value_t = probeshake_core::stabilize::DEFAULT_OBJECT_DISTANCE_M)]
    object_distance: f64,
}

impl FeatureArgs {
    fn config(&self) -> DetectConfig {
        let mut cfg = DetectConfig::default();
        cfg.features.n_regions = self.regions;
        cfg.features.region_size = self.region_size;
        cfg.features.mask_mode = match self.mask_mode {
            MaskArg::Energy => MaskMode::Energy,
            MaskArg::Count => MaskMode::Count,
        };
        cfg.features.normalize = match self.normalize {
            NormalizeArg::None => Normalize::None,
            NormalizeArg::Mean => Normalize::Mean,
            NormalizeArg::Log => Normalize::Log,
        };
        cfg.stabilize.mode = match self.stabilize {
            StabilizeArg::None => StabilizeMode::None,
            StabilizeArg::Expand => StabilizeMode::Expand,
            StabilizeArg::Imu => StabilizeMode::Imu,
            StabilizeArg::Centroid => StabilizeMode::Centroid,
        };
        cfg.stabilize.expand_size = self.expand_size;
        cfg.stabilize.geometry.object_distance_m = self.object_distance;
        cfg
    }
}

/// Explicit input files for a single clip; each defaults to the
/// conventional name inside the clip directory.
#[derive(Debug, Args)]
struct ClipArgs {
    /// Clip directory (frames + manifest.json).
    #[arg(long)]
    clip: PathBuf,
    /// Probe pattern JSON [default: <clip>/pattern.json].
    #[arg(long)]
    pattern: Option<PathBuf>,
    /// Landmarks JSON [default: <clip>/landmarks.json].
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// IMU CSV [default: <clip>/imu.csv if present].
    #[arg(long)]
    imu: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Corpus configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_real: Option<usize>,
    #[arg(long)]
    n_fake: Option<usize>,
    /// Clip duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    clip: ClipArgs,
    #[command(flatten)]
    features: FeatureArgs,
    /// Output JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus directory with labels.json; may be repeated.
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    /// Output model JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "nn2")]
    variant: VariantArg,
    #[arg(long, default_value_t = classify::DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = classify::DEFAULT_LR)]
    lr: f64,
    #[arg(long, value_enum, default_value = "adam")]
    optimizer: OptimizerArg,
    /// Hidden width for nn2.
    #[arg(long, default_value_t = classify::DEFAULT_HIDDEN)]
    hidden: usize,
    /// Neighbor count for knn.
    #[arg(long, default_value_t = classify::DEFAULT_K)]
    k: usize,
    /// Weight-initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[command(flatten)]
    clip: ClipArgs,
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Report JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Embed the current Unix time in the report.
    #[arg(long)]
    timestamps: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Corpus directory with labels.json.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    /// Metrics JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-clip CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PosArgs {
    #[command(flatten)]
    clip: ClipArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

/// Everything read from one clip directory.
struct LoadedClip {
    frames: FrameSequence,
    landmarks: LandmarkSet,
    imu: Option<ImuTrace>,
    pattern: VibrationPattern,
}

impl LoadedClip {
    fn load(args: &ClipArgs) -> probeshake_core::Result<Self> {
        let paths = ClipPaths::new(&args.clip);
        Self::load_from(
            &args.clip,
            args.pattern.clone().unwrap_or_else(|| paths.pattern()),
            args.landmarks.clone().unwrap_or_else(|| paths.landmarks()),
            args.imu.clone(),
        )
    }

    fn load_dir(dir: &Path) -> probeshake_core::Result<Self> {
        let paths = ClipPaths::new(dir);
        Self::load_from(dir, paths.pattern(), paths.landmarks(), None)
    }

    fn load_from(dir: &Path, pattern: PathBuf, landmarks: PathBuf, imu: Option<PathBuf>) -> probeshake_core::Result<Self> {
        let frames = io::load_frame_sequence(dir)?;
        let landmarks = io::load_landmarks_for(&landmarks, &frames)?;
        let pattern = io::load_pattern(&pattern)?;
        let imu = match imu {
            Some(p) => Some(io::load_imu(&p)?),
            None => {
                let p = ClipPaths::new(dir).imu();
                if p.exists() {
                    Some(io::load_imu(&p)?)
                } else {
                    None
                }
            }
        };
        Ok(Self {
            frames,
            landmarks,
            imu,
            pattern,
        })
    }

    fn analyze(&self, cfg: &DetectConfig) -> probeshake_core::Result<ClipAnalysis> {
        let inputs = ClipInputs {
            landmarks: &self.landmarks,
            imu: self.imu.as_ref(),
        };
        pipeline::analyze(&self.frames, inputs, &self.pattern, cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {raw:?}"))?;
    // A pool may already exist when `run` is called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command) -> probeshake_core::Result<i32> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pos(a) => pos(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> probeshake_core::Result<()> {
    match out {
        Some(p) => io::write_atomic(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

fn simulate(a: SimulateArgs) -> probeshake_core::Result<i32> {
    let mut cfg: CorpusConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => CorpusConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = a.n_real {
        cfg.n_real = n;
    }
    if let Some(n) = a.n_fake {
        cfg.n_fake = n;
    }
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    let labels = corpus::gen_corpus(&cfg, &a.out)?;
    let fakes = labels.iter().filter(|l| l.label == Verdict::Fake).count();
    eprintln!("wrote {} clips ({} real, {fakes} fake) to {}", labels.len(), labels.len() - fakes, a.out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExtractOutput<'a> {
    pattern: &'a VibrationPattern,
    config_digest: String,
    regions: &'a [FeatureVector],
    pos: &'a [f64],
}

fn extract(a: ExtractArgs) -> probeshake_core::Result<i32> {
    let cfg = a.features.config();
    let clip = LoadedClip::load(&a.clip)?;
    let analysis = clip.analyze(&cfg)?;
    let out = ExtractOutput {
        pattern: &clip.pattern,
        config_digest: cfg.digest(),
        regions: &analysis.vectors,
        pos: &analysis.pos,
    };
    emit(a.out.as_deref(), &to_json(&out))?;
    Ok(EXIT_OK)
}

/// Loads and analyzes every clip listed in a corpus manifest.
fn corpus_analyses(dir: &Path, cfg: &DetectConfig) -> probeshake_core::Result<Vec<(corpus::ClipLabel, ClipAnalysis)>> {
    let labels = corpus::load_labels(dir)?;
    labels
        .into_par_iter()
        .map(|label| {
            let clip = LoadedClip::load_dir(&dir.join(&label.clip_id))?;
            let analysis = clip.analyze(cfg)?;
            Ok((label, analysis))
        })
        .collect()
}

fn train(a: TrainArgs) -> probeshake_core::Result<i32> {
    let cfg = a.features.config();
    let mut dataset = LabeledDataset::new();
    for dir in &a.corpus {
        for (label, analysis) in corpus_analyses(dir, &cfg)? {
            for (i, v) in analysis.vectors.into_iter().enumerate() {
                let provenance = Provenance {
                    clip: label.clip_id.clone(),
                    region: i,
                };
                dataset.push(v.values, label.label, provenance);
            }
        }
    }
    let variant = match a.variant {
        VariantArg::Nn2 => Variant::Nn2,
        VariantArg::Logistic => Variant::Logistic,
        VariantArg::Knn => Variant::Knn,
    };
    let tc = TrainConfig {
        lr: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        hidden: a.hidden,
        k: a.k,
        optimizer: match a.optimizer {
            OptimizerArg::Gd => Optimizer::Gd,
            OptimizerArg::Adam => Optimizer::Adam,
        },
    };
    let model = classify::train(&dataset, variant, &tc)?;
    io::save_model(&model, &a.out)?;
    let (n_real, n_fake) = dataset.class_counts();
    eprintln!("trained {variant} on {n_real} real / {n_fake} fake region vectors -> {}", a.out.display());
    Ok(EXIT_OK)
}

fn detect(a: DetectArgs) -> probeshake_core::Result<i32> {
    let cfg = a.features.config();
    let model = io::load_model(&a.model)?;
    let clip = LoadedClip::load(&a.clip)?;
    let inputs = ClipInputs {
        landmarks: &clip.landmarks,
        imu: clip.imu.as_ref(),
    };
    let mut report = pipeline::detect(&clip.frames, inputs, &clip.pattern, &model, &cfg)?;
    if a.timestamps {
        report.timestamp_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    }
    emit(a.out.as_deref(), &to_json(&report))?;
    Ok(match report.verdict {
        Verdict::Real => EXIT_OK,
        Verdict::Fake => EXIT_FAKE,
    })
}

#[derive(Serialize)]
struct ClipRow {
    clip_id: String,
    label: Verdict,
    verdict: Verdict,
    score: f64,
    pos: f64,
}

fn evaluate(a: EvaluateArgs) -> probeshake_core::Result<i32> {
    let cfg = a.features.config();
    let model = io::load_model(&a.model)?;
    let mut rows = Vec::new();
    for (label, analysis) in corpus_analyses(&a.corpus, &cfg)? {
        let vectors: Vec<&[f64]> = analysis.vectors.iter().map(|v| v.values.as_slice()).collect();
        let p = model.predict_clip(&vectors)?;
        rows.push(ClipRow {
            clip_id: label.clip_id,
            label: label.label,
            verdict: p.verdict,
            score: p.score,
            pos: analysis.mean_pos(),
        });
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let labels: Vec<Verdict> = rows.iter().map(|r| r.label).collect();
    let mut eval = metrics::evaluate_scores(&scores, &labels)?;
    // Clip accuracy follows the majority vote, not the mean-score threshold.
    eval.acc = rows.iter().filter(|r| r.verdict == r.label).count() as f64 / rows.len() as f64;
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(|e| Error::invalid("csv", e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid("csv", e.to_string()))?;
        io::write_atomic(path, &bytes)?;
    }
    emit(a.out.as_deref(), &to_json(&eval))?;
    Ok(EXIT_OK)
}

fn pos(a: PosArgs) -> probeshake_core::Result<i32> {
    let cfg = a.features.config();
    let clip = LoadedClip::load(&a.clip)?;
    let analysis = clip.analyze(&cfg)?;
    emit(None, &format!("{}", analysis.mean_pos()))?;
    Ok(EXIT_OK)
}
