use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_scene, ClipRenderer, ClipSpec, ImuConfig, NoiseSpec, ResponseModel, ResponseParams, ResponseVariant, SceneConfig};
use crate::error::{Error, Result};
use crate::io::{self, ClipPaths};
use crate::probe;
use crate::types::{Fps, VibrationPattern, Verdict};

pub const LABELS_FILE: &str = "labels.json";
pub const CONFIG_FILE: &str = "config.json";

fn default_fake_mix() -> Vec<ResponseVariant> {
    ResponseVariant::FAKES.to_vec()
}

fn default_noise_grid() -> Vec<NoiseSpec> {
    use super::DriftShape::{Ramp, Sine};
    vec![
        NoiseSpec::default(),
        NoiseSpec {
            sensor_sigma: 3.0,
            drift_amplitude: 0.05,
            drift_shape: Ramp,
            ..Default::default()
        },
        NoiseSpec {
            sensor_sigma: 2.0,
            drift_amplitude: 0.05,
            drift_shape: Sine,
            ..Default::default()
        },
    ]
}

/// Everything needed to regenerate a corpus bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub master_seed: u64,
    pub n_real: usize,
    pub n_fake: usize,
    /// Fake clips cycle through this list.
    pub fake_mix: Vec<ResponseVariant>,
    pub fps: Fps,
    pub duration_s: f64,
    pub period_range_s: (f64, f64),
    pub scene: SceneConfig,
    pub response: ResponseParams,
    /// Each clip draws one entry.
    pub noise_grid: Vec<NoiseSpec>,
    pub imu: ImuConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_real: 100,
            n_fake: 100,
            fake_mix: default_fake_mix(),
            fps: Fps::default(),
            duration_s: 4.0,
            period_range_s: (1.0, 2.0),
            scene: SceneConfig::default(),
            response: ResponseParams::default(),
            noise_grid: default_noise_grid(),
            imu: ImuConfig::default(),
        }
    }
}

/// Manifest entry for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipLabel {
    pub clip_id: String,
    pub label: Verdict,
    pub response_variant: ResponseVariant,
    pub pattern: VibrationPattern,
    pub noise: NoiseSpec,
    pub scene_seed: u64,
    pub render_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipPlan {
    pub index: usize,
    pub label: ClipLabel,
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_real == 0 || self.n_fake == 0 {
            return Err(Error::invalid("corpus", format!("need at least one clip per class, got {}/{}", self.n_real, self.n_fake)));
        }
        if self.fake_mix.is_empty() || self.noise_grid.is_empty() {
            return Err(Error::invalid("corpus", "fake_mix and noise_grid must be non-empty"));
        }
        self.scene.validate()?;
        self.response.validate()?;
        self.imu.validate()?;
        self.noise_grid.iter().try_for_each(NoiseSpec::validate)
    }

    pub fn len(&self) -> usize {
        self.n_real + self.n_fake
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-clip seeds come from stream `index` of the master generator, so
    /// a clip's content does not depend on how many clips precede it or on
    /// the order they are rendered in.
    pub fn plan_clip(&self, index: usize) -> Result<ClipPlan> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index as u64);
        let scene_seed = rng.next_u64();
        let pattern_seed = rng.next_u64();
        let render_seed = rng.next_u64();
        let noise_pick = (rng.next_u64() % self.noise_grid.len() as u64) as usize;
        let variant = if index < self.n_real {
            ResponseVariant::Real
        } else {
            self.fake_mix[(index - self.n_real) % self.fake_mix.len()]
        };
        let label = if index < self.n_real { Verdict::Real } else { Verdict::Fake };
        let pattern = probe::randomize_pattern(pattern_seed, self.period_range_s, self.duration_s, self.fps.as_f64())?;
        Ok(ClipPlan {
            index,
            label: ClipLabel {
                clip_id: format!("clip_{index:04}"),
                label,
                response_variant: variant,
                pattern,
                noise: self.noise_grid[noise_pick],
                scene_seed,
                render_seed,
            },
        })
    }

    pub fn plan(&self) -> Result<Vec<ClipPlan>> {
        self.validate()?;
        (0..self.len()).map(|i| self.plan_clip(i)).collect()
    }

    pub fn renderer(&self, plan: &ClipPlan) -> Result<ClipRenderer> {
        let l = &plan.label;
        let scene = make_scene(l.scene_seed, &self.scene)?;
        let spec = ClipSpec {
            pattern: l.pattern,
            response: ResponseModel {
                variant: l.response_variant,
                params: self.response,
            },
            noise: l.noise,
            imu: self.imu,
            fps: self.fps,
        };
        ClipRenderer::new(scene, spec, l.render_seed)
    }
}

fn write_clip(cfg: &CorpusConfig, plan: &ClipPlan, root: &Path) -> Result<()> {
    let clip = cfg.renderer(plan)?.render()?;
    let dir = root.join(&plan.label.clip_id);
    io::save_frame_sequence(&clip.frames, &dir)?;
    let paths = ClipPaths::new(&dir);
    io::save_landmarks(&clip.landmarks, &paths.landmarks())?;
    io::save_imu(&clip.imu, &paths.imu())?;
    io::save_pattern(&plan.label.pattern, &paths.pattern())
}

/// Writes `clip_NNNN/` directories plus `labels.json` and `config.json`.
pub fn gen_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<Vec<ClipLabel>> {
    let plans = cfg.plan()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    plans.par_iter().try_for_each(|p| write_clip(cfg, p, dir))?;
    let labels: Vec<ClipLabel> = plans.into_iter().map(|p| p.label).collect();
    io::write_json(&dir.join(LABELS_FILE), &labels)?;
    io::write_json(&dir.join(CONFIG_FILE), cfg)?;
    Ok(labels)
}

pub fn load_labels(dir: &Path) -> Result<Vec<ClipLabel>> {
    io::read_json(&dir.join(LABELS_FILE))
}
