//! End-to-end wiring: region selection on the first frame, optional tremor
//! compensation, per-frame variance, probe filtering, classification and
//! the detection report. Works on any [`FrameSource`], so clips loaded from
//! disk and clips rendered on demand by the simulator share one code path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{Classifier, ClipPrediction, LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::features::{self, FeatureConfig, FeatureVector, RegionSet};
use crate::probe;
use crate::simulate::ClipRenderer;
use crate::spectral;
use crate::stabilize::{self, ImuGeometry, RegionTrack, StabilizeMode, DEFAULT_EXPANDED_SIZE, DEFAULT_OBJECT_DISTANCE_M};
use crate::optics::LensConfig;
use crate::types::{DetectionReport, Fps, FrameSequence, GrayFrame, ImuTrace, LandmarkSet, Region, RegionVote, VarianceSequence, VibrationPattern, Verdict};

/// Random access to the frames of a clip.
pub trait FrameSource: Sync {
    fn n_frames(&self) -> usize;
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn fps(&self) -> Fps;
    fn frame(&self, k: usize) -> Result<GrayFrame>;
    /// The pixels of frame `k` inside `region`.
    fn window(&self, k: usize, region: Region) -> Result<GrayFrame>;
}

impl FrameSource for FrameSequence {
    fn n_frames(&self) -> usize {
        self.len()
    }

    fn width(&self) -> usize {
        FrameSequence::width(self)
    }

    fn height(&self) -> usize {
        FrameSequence::height(self)
    }

    fn fps(&self) -> Fps {
        FrameSequence::fps(self)
    }

    fn frame(&self, k: usize) -> Result<GrayFrame> {
        self.frames()
            .get(k)
            .cloned()
            .ok_or_else(|| Error::invalid("frame index", format!("{k} ≥ {}", self.len())))
    }

    fn window(&self, k: usize, region: Region) -> Result<GrayFrame> {
        let f = self
            .frames()
            .get(k)
            .ok_or_else(|| Error::invalid("frame index", format!("{k} ≥ {}", self.len())))?;
        region.check_bounds(f.width(), f.height())?;
        Ok(GrayFrame::from_fn(region.w, region.h, |x, y| f.get(region.x + x, region.y + y)))
    }
}

impl FrameSource for ClipRenderer {
    fn n_frames(&self) -> usize {
        ClipRenderer::n_frames(self)
    }

    fn width(&self) -> usize {
        ClipRenderer::width(self)
    }

    fn height(&self) -> usize {
        ClipRenderer::height(self)
    }

    fn fps(&self) -> Fps {
        ClipRenderer::fps(self)
    }

    fn frame(&self, k: usize) -> Result<GrayFrame> {
        self.render_frame(k)
    }

    fn window(&self, k: usize, region: Region) -> Result<GrayFrame> {
        self.render_window(k, region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilizeConfig {
    pub mode: StabilizeMode,
    pub expand_size: usize,
    pub geometry: ImuGeometry,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        Self {
            mode: StabilizeMode::None,
            expand_size: DEFAULT_EXPANDED_SIZE,
            geometry: ImuGeometry {
                object_distance_m: DEFAULT_OBJECT_DISTANCE_M,
                focal_length_px: LensConfig::reference_phone().focal_length_px(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub features: FeatureConfig,
    pub stabilize: StabilizeConfig,
}

impl DetectConfig {
    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Per-clip side inputs.
#[derive(Debug, Clone, Copy)]
pub struct ClipInputs<'a> {
    pub landmarks: &'a LandmarkSet,
    pub imu: Option<&'a ImuTrace>,
}

/// Selects regions on frame 0 and builds the per-frame track.
pub fn track_regions<S: FrameSource + ?Sized>(src: &S, inputs: ClipInputs<'_>, cfg: &DetectConfig) -> Result<(RegionSet, RegionTrack)> {
    let n = src.n_frames();
    let (w, h) = (src.width(), src.height());
    inputs.landmarks.check_frame_count(n)?;
    let f = &cfg.features;
    let first = src.frame(0)?;
    let mut regions = features::select_regions(&first, inputs.landmarks.frame(0), f.region_size, f.n_regions, &f.excluded)?;
    let s = &cfg.stabilize;
    let track = match s.mode {
        StabilizeMode::None => RegionTrack::identity(regions.boxes(), n, w, h),
        StabilizeMode::Expand => {
            regions = stabilize::expand_regions(&regions, s.expand_size, w, h)?;
            RegionTrack::identity(regions.boxes(), n, w, h)
        }
        StabilizeMode::Imu => {
            let imu = inputs
                .imu
                .ok_or_else(|| Error::invalid("stabilize", "imu mode needs an IMU trace"))?;
            stabilize::imu_stabilize(regions.boxes(), imu, src.fps().as_f64(), n, s.geometry, (w, h))?
        }
        StabilizeMode::Centroid => stabilize::centroid_stabilize(regions.boxes(), inputs.landmarks, n, w, h)?,
    };
    Ok((regions, track))
}

/// Variance sequence of every tracked region.
pub fn tracked_sequences<S: FrameSource + ?Sized>(src: &S, track: &RegionTrack, use_gradient: bool) -> Result<Vec<VarianceSequence>> {
    let n = src.n_frames();
    let fps = src.fps().as_f64();
    (0..track.base.len())
        .into_par_iter()
        .map(|i| {
            let values = (0..n)
                .map(|k| {
                    let win = src.window(k, track.region_at(i, k))?;
                    let whole = Region::new(0, 0, win.width(), win.height());
                    features::region_variance(&win, &whole, use_gradient)
                })
                .collect::<Result<Vec<_>>>()?;
            VarianceSequence::new(values, fps)
        })
        .collect()
}

/// Intermediate results for one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipAnalysis {
    pub regions: RegionSet,
    pub sequences: Vec<VarianceSequence>,
    pub ideal: Vec<f64>,
    pub vectors: Vec<FeatureVector>,
    /// POS of each raw variance sequence against the ideal.
    pub pos: Vec<f64>,
}

impl ClipAnalysis {
    pub fn mean_pos(&self) -> f64 {
        self.pos.iter().sum::<f64>() / self.pos.len().max(1) as f64
    }
}

pub fn check_pattern(pattern: &VibrationPattern, n_frames: usize, fps: f64) -> Result<()> {
    pattern.validate()?;
    let clip_s = n_frames as f64 / fps;
    if clip_s + 1e-9 < pattern.period_s {
        return Err(Error::ClipTooShort {
            clip_s,
            period_s: pattern.period_s,
        });
    }
    Ok(())
}

pub fn analyze<S: FrameSource + ?Sized>(src: &S, inputs: ClipInputs<'_>, pattern: &VibrationPattern, cfg: &DetectConfig) -> Result<ClipAnalysis> {
    let n = src.n_frames();
    let fps = src.fps().as_f64();
    check_pattern(pattern, n, fps)?;
    let (regions, track) = track_regions(src, inputs, cfg)?;
    let sequences = tracked_sequences(src, &track, cfg.features.use_gradient)?;
    let (ideal, mask) = features::probe_reference(pattern, fps, n, cfg.features.mask_mode)?;
    let vectors = regions
        .regions
        .iter()
        .zip(&sequences)
        .map(|(r, seq)| {
            Ok(FeatureVector {
                anchor: r.anchor,
                region: r.region,
                values: features::feature_values(&seq.values, &mask, cfg.features.normalize)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pos = sequences
        .iter()
        .map(|s| spectral::pos(&s.values, &ideal))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClipAnalysis {
        regions,
        sequences,
        ideal,
        vectors,
        pos,
    })
}

pub fn report(analysis: &ClipAnalysis, prediction: &ClipPrediction, pattern: &VibrationPattern, cfg: &DetectConfig) -> DetectionReport {
    let regions = analysis
        .vectors
        .iter()
        .zip(&prediction.regions)
        .map(|(v, p)| RegionVote {
            x: v.region.x,
            y: v.region.y,
            w: v.region.w,
            h: v.region.h,
            vote: p.vote,
            score: p.score,
        })
        .collect();
    DetectionReport {
        verdict: prediction.verdict,
        score: prediction.score,
        pos: analysis.mean_pos(),
        pattern: *pattern,
        regions,
        config_digest: cfg.digest(),
        timestamp_unix_s: None,
    }
}

pub fn detect<S: FrameSource + ?Sized>(
    src: &S,
    inputs: ClipInputs<'_>,
    pattern: &VibrationPattern,
    model: &Classifier,
    cfg: &DetectConfig,
) -> Result<DetectionReport> {
    let analysis = analyze(src, inputs, pattern, cfg)?;
    let vectors: Vec<&[f64]> = analysis.vectors.iter().map(|v| v.values.as_slice()).collect();
    let prediction = model.predict_clip(&vectors)?;
    Ok(report(&analysis, &prediction, pattern, cfg))
}

/// Feature vectors of one labeled clip, ready for training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip_id: String,
    pub label: Verdict,
    pub vectors: Vec<Vec<f64>>,
    pub pos: Vec<f64>,
}

pub fn to_dataset(clips: &[LabeledClip]) -> LabeledDataset {
    let mut ds = LabeledDataset::new();
    for c in clips {
        for (i, v) in c.vectors.iter().enumerate() {
            ds.push(
                v.clone(),
                c.label,
                Provenance {
                    clip: c.clip_id.clone(),
                    region: i,
                },
            );
        }
    }
    ds
}

/// Clip-level accuracy (majority vote) and mean single-region accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteSummary {
    pub clip_acc: f64,
    pub region_acc: f64,
    pub clip_auc: f64,
}

pub fn vote_summary(model: &Classifier, clips: &[LabeledClip]) -> Result<VoteSummary> {
    let mut clip_scores = Vec::with_capacity(clips.len());
    let mut labels = Vec::with_capacity(clips.len());
    let (mut clip_ok, mut region_ok, mut regions) = (0usize, 0usize, 0usize);
    for c in clips {
        let p = model.predict_clip(&c.vectors)?;
        clip_ok += (p.verdict == c.label) as usize;
        region_ok += p.regions.iter().filter(|r| r.vote == c.label).count();
        regions += p.regions.len();
        clip_scores.push(p.score);
        labels.push(c.label);
    }
    Ok(VoteSummary {
        clip_acc: clip_ok as f64 / clips.len().max(1) as f64,
        region_acc: region_ok as f64 / regions.max(1) as f64,
        clip_auc: crate::classify::auc(&clip_scores, &labels)?,
    })
}

/// Renders and analyzes corpus clips in memory without touching disk.
pub fn corpus_clips(corpus: &crate::simulate::CorpusConfig, cfg: &DetectConfig) -> Result<Vec<LabeledClip>> {
    let plans = corpus.plan()?;
    plans
        .par_iter()
        .map(|plan| {
            let r = corpus.renderer(plan)?;
            let inputs = ClipInputs {
                landmarks: r.landmarks(),
                imu: Some(r.imu()),
            };
            let a = analyze(&r, inputs, &plan.label.pattern, cfg)?;
            Ok(LabeledClip {
                clip_id: plan.label.clip_id.clone(),
                label: plan.label.label,
                vectors: a.vectors.into_iter().map(|v| v.values).collect(),
                pos: a.pos,
            })
        })
        .collect()
}

/// Ideal sequence for a clip, exposed for the CLI `pos` command.
pub fn ideal_for(pattern: &VibrationPattern, fps: f64, n_frames: usize) -> Vec<f64> {
    probe::ideal_variance_sequence(pattern, fps, n_frames).values
}
