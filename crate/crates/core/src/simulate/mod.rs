//! Deterministic synthetic probe-response clips: a layered gray-shape face,
//! per-frame Gaussian blur driven by the vibration schedule (faithfully for
//! genuine clips, inconsistently inside the face-swap area for fakes),
//! illumination drift, sensor noise, hand tremor, landmarks and a matching
//! accelerometer trace.
//!
//! Every pixel is a pure function of the clip plan, so rendering any window
//! of a frame gives exactly the same values as cropping a full render.

mod blur;
mod corpus;
mod scene;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::LensConfig;
use crate::probe;
use crate::types::{Fps, FrameSequence, GrayFrame, ImuTrace, LandmarkSet, Point, Region, VibrationPattern, Verdict, LANDMARK_COUNT};

pub use blur::{blur_window, gaussian_blur, gaussian_blur_plane, gaussian_kernel, quantize, Plane};
pub use corpus::{gen_corpus, load_labels, ClipLabel, ClipPlan, CorpusConfig, CONFIG_FILE, LABELS_FILE};
pub use scene::{make_scene, Ellipse, Scene, SceneConfig, SceneSpec, Shape, MIN_SCENE_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseVariant {
    Real,
    FakeStatic,
    FakeRandom,
    FakeAdaptive,
}

impl ResponseVariant {
    pub const FAKES: [ResponseVariant; 3] = [ResponseVariant::FakeStatic, ResponseVariant::FakeRandom, ResponseVariant::FakeAdaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            ResponseVariant::Real => "REAL",
            ResponseVariant::FakeStatic => "FAKE_STATIC",
            ResponseVariant::FakeRandom => "FAKE_RANDOM",
            ResponseVariant::FakeAdaptive => "FAKE_ADAPTIVE",
        }
    }
}

impl fmt::Display for ResponseVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResponseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "REAL" => Ok(ResponseVariant::Real),
            "FAKE_STATIC" | "STATIC" => Ok(ResponseVariant::FakeStatic),
            "FAKE_RANDOM" | "RANDOM" => Ok(ResponseVariant::FakeRandom),
            "FAKE_ADAPTIVE" | "ADAPTIVE" => Ok(ResponseVariant::FakeAdaptive),
            _ => Err(Error::invalid("response variant", format!("{s:?}"))),
        }
    }
}

/// Blur parameters shared by all response variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseParams {
    /// σ drawn uniformly per vibrating frame.
    pub sigma_on: (f64, f64),
    /// Face σ range for the random fake.
    pub random_range: (f64, f64),
    /// Trailing window of the adaptive fake, in frames.
    pub lag: usize,
}

impl Default for ResponseParams {
    fn default() -> Self {
        Self {
            sigma_on: (0.4, 1.0),
            random_range: (0.0, 3.0),
            lag: 10,
        }
    }
}

impl ResponseParams {
    pub fn validate(&self) -> Result<()> {
        for (what, (lo, hi)) in [("sigma_on", self.sigma_on), ("random_range", self.random_range)] {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid("response", format!("{what} = [{lo}, {hi}] must be an ordered range of σ ≥ 0")));
            }
        }
        if self.lag == 0 {
            return Err(Error::invalid("response", "lag must be at least 1 frame"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub variant: ResponseVariant,
    #[serde(flatten)]
    pub params: ResponseParams,
}

impl ResponseModel {
    pub fn new(variant: ResponseVariant) -> Self {
        Self {
            variant,
            params: ResponseParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftShape {
    #[default]
    Ramp,
    Sine,
}

/// Nuisance factors. Drift is a multiplicative gain `1 + A·s(t)` with
/// `s` rising 0→1 (ramp) or one sine period over the clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub sensor_sigma: f64,
    pub drift_amplitude: f64,
    pub drift_shape: DriftShape,
    pub tremor_step_px: f64,
    pub tremor_max_px: u32,
    pub landmark_jitter_px: f64,
    pub accel_noise: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sensor_sigma: 2.0,
            drift_amplitude: 0.0,
            drift_shape: DriftShape::Ramp,
            tremor_step_px: 0.0,
            tremor_max_px: 0,
            landmark_jitter_px: 0.0,
            accel_noise: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self {
            sensor_sigma: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("sensor_sigma", self.sensor_sigma),
            ("drift_amplitude", self.drift_amplitude),
            ("tremor_step_px", self.tremor_step_px),
            ("landmark_jitter_px", self.landmark_jitter_px),
            ("accel_noise", self.accel_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("noise", format!("{what} = {v} must be ≥ 0")));
            }
        }
        Ok(())
    }

    fn gain(&self, t_s: f64, duration_s: f64) -> f64 {
        let u = t_s / duration_s;
        let s = match self.drift_shape {
            DriftShape::Ramp => u,
            DriftShape::Sine => (2.0 * std::f64::consts::PI * u).sin(),
        };
        1.0 + self.drift_amplitude * s
    }
}

/// Accelerometer synthesis. The vibration burst is a displacement of
/// `burst_amplitude_m` at `burst_freq_hz` along z; tremor appears on x/y as
/// the camera motion that would shift the image by the tremor offsets for
/// a face at `true_distance_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuConfig {
    pub rate_hz: f64,
    pub burst_amplitude_m: f64,
    pub burst_freq_hz: f64,
    pub ramp_s: f64,
    pub true_distance_m: f64,
    pub focal_length_px: f64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            rate_hz: 400.0,
            burst_amplitude_m: 1.5e-6,
            burst_freq_hz: 50.0,
            ramp_s: 0.02,
            true_distance_m: 0.2,
            focal_length_px: LensConfig::reference_phone().focal_length_px(),
        }
    }
}

impl ImuConfig {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("rate_hz", self.rate_hz),
            ("burst_freq_hz", self.burst_freq_hz),
            ("true_distance_m", self.true_distance_m),
            ("focal_length_px", self.focal_length_px),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid("imu", format!("{what} = {v} must be > 0")));
            }
        }
        if !(self.burst_amplitude_m >= 0.0 && self.ramp_s >= 0.0) {
            return Err(Error::invalid("imu", "amplitude and ramp must be ≥ 0"));
        }
        Ok(())
    }
}

/// Everything about a clip except its scene and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub pattern: VibrationPattern,
    pub response: ResponseModel,
    pub noise: NoiseSpec,
    pub imu: ImuConfig,
    pub fps: Fps,
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// A fully planned clip that renders frames (or windows of frames) on demand.
#[derive(Debug, Clone)]
pub struct ClipRenderer {
    scene: Scene,
    spec: ClipSpec,
    n_frames: usize,
    bg_sigma: Vec<f64>,
    face_sigma: Vec<f64>,
    gain: Vec<f64>,
    tremor: Vec<(i64, i64)>,
    noise_seed: u64,
    landmarks: LandmarkSet,
    imu: ImuTrace,
}

impl ClipRenderer {
    pub fn new(scene: Scene, spec: ClipSpec, seed: u64) -> Result<Self> {
        spec.pattern.validate()?;
        spec.response.params.validate()?;
        spec.noise.validate()?;
        spec.imu.validate()?;
        let pattern = &spec.pattern;
        if !pattern.has_full_cycle() {
            return Err(Error::ClipTooShort {
                clip_s: pattern.duration_s,
                period_s: pattern.period_s,
            });
        }
        let fps = spec.fps.as_f64();
        let n_frames = spec.fps.frames_in(pattern.duration_s);
        if n_frames < 2 {
            return Err(Error::invalid("clip", format!("{} s at {fps} fps is under 2 frames", pattern.duration_s)));
        }

        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let response_seed = seeds.next_u64();
        let noise_seed = seeds.next_u64();
        let tremor_seed = seeds.next_u64();
        let jitter_seed = seeds.next_u64();
        let imu_seed = seeds.next_u64();

        let states = probe::schedule(pattern, fps, n_frames).states;
        let (bg_sigma, face_sigma) = draw_sigmas(&states, &spec.response, response_seed);
        let gain = (0..n_frames)
            .map(|k| spec.noise.gain(k as f64 / fps, pattern.duration_s))
            .collect();
        let tremor = tremor_walk(&spec.noise, n_frames, tremor_seed);

        let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
        let jitter = Normal::new(0.0, spec.noise.landmark_jitter_px.max(0.0)).map_err(|e| Error::invalid("noise", e.to_string()))?;
        let frames = tremor
            .iter()
            .map(|&(tx, ty)| {
                let mut pts = scene.landmarks;
                for p in &mut pts {
                    p.x += tx as f64;
                    p.y += ty as f64;
                    if spec.noise.landmark_jitter_px > 0.0 {
                        p.x += jitter.sample(&mut rng);
                        p.y += jitter.sample(&mut rng);
                    }
                }
                pts
            })
            .collect::<Vec<[Point; LANDMARK_COUNT]>>();
        let landmarks = LandmarkSet::new(frames);
        let imu = synth_imu(&spec, &tremor, imu_seed)?;

        Ok(Self {
            scene,
            spec,
            n_frames,
            bg_sigma,
            face_sigma,
            gain,
            tremor,
            noise_seed,
            landmarks,
            imu,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn width(&self) -> usize {
        self.scene.spec.width
    }

    pub fn height(&self) -> usize {
        self.scene.spec.height
    }

    pub fn fps(&self) -> Fps {
        self.spec.fps
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn spec(&self) -> &ClipSpec {
        &self.spec
    }

    pub fn label(&self) -> Verdict {
        if self.spec.response.variant == ResponseVariant::Real {
            Verdict::Real
        } else {
            Verdict::Fake
        }
    }

    /// Background (probe-driven) σ per frame.
    pub fn background_sigmas(&self) -> &[f64] {
        &self.bg_sigma
    }

    /// σ inside the face-swap area per frame.
    pub fn face_sigmas(&self) -> &[f64] {
        &self.face_sigma
    }

    pub fn tremor(&self) -> &[(i64, i64)] {
        &self.tremor
    }

    pub fn landmarks(&self) -> &LandmarkSet {
        &self.landmarks
    }

    pub fn imu(&self) -> &ImuTrace {
        &self.imu
    }

    /// Pixels of frame `k` inside `window`, row-major.
    pub fn render_window(&self, k: usize, window: Region) -> Result<GrayFrame> {
        let (w, h) = (self.width(), self.height());
        window.check_bounds(w, h)?;
        if k >= self.n_frames {
            return Err(Error::invalid("frame index", format!("{k} ≥ {}", self.n_frames)));
        }
        let (tx, ty) = self.tremor[k];
        let base = &self.scene.base;
        let source = |x: usize, y: usize| base.get_clamped(x as i64 - tx, y as i64 - ty);
        let bg = blur_window(source, w, h, window, self.bg_sigma[k]);
        let face = (self.spec.response.variant != ResponseVariant::Real)
            .then(|| blur_window(source, w, h, window, self.face_sigma[k]));
        let mask = self.scene.spec.swap_mask;
        let gain = self.gain[k];
        let sensor = self.spec.noise.sensor_sigma;

        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        rng.set_stream(k as u64);
        let mut data = Vec::with_capacity(window.area());
        for j in 0..window.h {
            let y = window.y + j;
            rng.set_word_pos(2 * (y * w + window.x) as u128);
            for i in 0..window.w {
                let x = window.x + i;
                let idx = j * window.w + i;
                let mut v = match &face {
                    Some(f) if mask.contains((x as i64 - tx) as f64 + 0.5, (y as i64 - ty) as f64 + 0.5) => f[idx],
                    _ => bg[idx],
                };
                v *= gain;
                if sensor > 0.0 {
                    v += sensor * box_muller(rng.next_u64());
                }
                data.push(quantize(v));
            }
        }
        GrayFrame::new(window.w, window.h, data)
    }

    pub fn render_frame(&self, k: usize) -> Result<GrayFrame> {
        self.render_window(k, Region::new(0, 0, self.width(), self.height()))
    }

    pub fn render(&self) -> Result<RenderedClip> {
        let frames = (0..self.n_frames)
            .map(|k| self.render_frame(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(RenderedClip {
            frames: FrameSequence::new(frames, self.spec.fps)?,
            landmarks: self.landmarks.clone(),
            imu: self.imu.clone(),
            label: self.label(),
        })
    }
}

/// One standard normal from 64 random bits (two 32-bit uniforms).
#[inline]
fn box_muller(bits: u64) -> f64 {
    let u1 = ((bits >> 32) as f64 + 0.5) / 4_294_967_296.0;
    let u2 = (bits & 0xffff_ffff) as f64 / 4_294_967_296.0;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn draw_sigmas(states: &[bool], response: &ResponseModel, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let p = &response.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mut bg = Vec::with_capacity(states.len());
    let mut face = Vec::with_capacity(states.len());
    for (k, &on) in states.iter().enumerate() {
        // Both draws happen every frame so the streams stay aligned across variants.
        let s_on = uniform(&mut rng, p.sigma_on);
        let s_rand = uniform(&mut rng, p.random_range);
        let s = if on { s_on } else { 0.0 };
        bg.push(s);
        face.push(match response.variant {
            ResponseVariant::Real => s,
            ResponseVariant::FakeStatic => 0.0,
            ResponseVariant::FakeRandom => s_rand,
            ResponseVariant::FakeAdaptive => {
                let start = k.saturating_sub(p.lag);
                bg[start..k].iter().sum::<f64>() / p.lag as f64
            }
        });
    }
    (bg, face)
}

fn tremor_walk(noise: &NoiseSpec, n: usize, seed: u64) -> Vec<(i64, i64)> {
    let mut out = vec![(0i64, 0i64); n];
    if noise.tremor_step_px <= 0.0 || noise.tremor_max_px == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, noise.tremor_step_px).expect("validated σ");
    let m = noise.tremor_max_px as i64;
    for k in 1..n {
        let (x, y) = out[k - 1];
        let dx = step.sample(&mut rng).round() as i64;
        let dy = step.sample(&mut rng).round() as i64;
        out[k] = ((x + dx).clamp(-m, m), (y + dy).clamp(-m, m));
    }
    out
}

/// Displacement profiles are sampled, pinned to zero for the first two
/// samples, and converted to acceleration by second differences, so Euler
/// double integration reproduces them exactly.
fn synth_imu(spec: &ClipSpec, tremor: &[(i64, i64)], seed: u64) -> Result<ImuTrace> {
    let cfg = &spec.imu;
    let fps = spec.fps.as_f64();
    let pattern = &spec.pattern;
    let n = ((pattern.duration_s * cfg.rate_hz).round() as usize).max(2);
    let dt = 1.0 / cfg.rate_hz;
    let n_frames = tremor.len();
    let m_per_px = cfg.true_distance_m / cfg.focal_length_px;
    // Camera displacement that shifts the image content by +p pixels.
    let cam = |axis: usize, t: f64| -> f64 {
        let u = t * fps;
        let k = (u.floor() as usize).min(n_frames - 1);
        let k1 = (k + 1).min(n_frames - 1);
        let p = |i: usize| if axis == 0 { tremor[i].0 } else { tremor[i].1 } as f64;
        let pk = p(k) + (p(k1) - p(k)) * smoothstep(u - k as f64);
        -pk * m_per_px
    };
    let burst = |t: f64| -> f64 {
        if !probe::is_on_at(pattern, t) {
            return 0.0;
        }
        let period = pattern.period_s;
        let u = ((t - pattern.phase_s) / period).rem_euclid(1.0);
        let edge = (u * period).min((pattern.duty - u) * period);
        let env = if cfg.ramp_s > 0.0 { smoothstep(edge / cfg.ramp_s) } else { 1.0 };
        cfg.burst_amplitude_m * env * (2.0 * std::f64::consts::PI * cfg.burst_freq_hz * t).sin()
    };
    let profile = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..n + 2).map(|i| if i < 2 { 0.0 } else { f(i as f64 * dt) }).collect()
    };
    let px = profile(&|t| cam(0, t));
    let py = profile(&|t| cam(1, t));
    let pz = profile(&burst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise.accel_noise).map_err(|e| Error::invalid("noise", e.to_string()))?;
    let accel = |p: &[f64], i: usize| (p[i + 2] - 2.0 * p[i + 1] + p[i]) / (dt * dt);
    let samples = (0..n)
        .map(|i| {
            let mut a = [accel(&px, i), accel(&py, i), accel(&pz, i)];
            if spec.noise.accel_noise > 0.0 {
                for v in &mut a {
                    *v += noise.sample(&mut rng);
                }
            }
            a
        })
        .collect();
    ImuTrace::new(samples, cfg.rate_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedClip {
    pub frames: FrameSequence,
    pub landmarks: LandmarkSet,
    pub imu: ImuTrace,
    pub label: Verdict,
}

/// Renders a whole clip in memory.
pub fn render_clip(scene: &Scene, spec: &ClipSpec, seed: u64) -> Result<RenderedClip> {
    ClipRenderer::new(scene.clone(), spec.clone(), seed)?.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variant: ResponseVariant, noise: NoiseSpec) -> ClipSpec {
        ClipSpec {
            pattern: VibrationPattern::new(1.0, 0.5, 2.0, 0.0).unwrap(),
            response: ResponseModel::new(variant),
            noise,
            imu: ImuConfig::default(),
            fps: Fps::default(),
        }
    }

    #[test]
    fn window_equals_crop() {
        let scene = make_scene(3, &SceneConfig::default()).unwrap();
        let noise = NoiseSpec {
            tremor_step_px: 1.0,
            tremor_max_px: 6,
            drift_amplitude: 0.1,
            ..Default::default()
        };
        let r = ClipRenderer::new(scene, spec(ResponseVariant::FakeRandom, noise), 11).unwrap();
        for k in [0, 7, 40] {
            let full = r.render_frame(k).unwrap();
            let win = Region::new(93, 120, 31, 17);
            let part = r.render_window(k, win).unwrap();
            for j in 0..win.h {
                for i in 0..win.w {
                    assert_eq!(part.get(i, j), full.get(win.x + i, win.y + j));
                }
            }
        }
    }

    #[test]
    fn static_and_real_match_without_blur() {
        let scene = make_scene(3, &SceneConfig::default()).unwrap();
        let mut a = spec(ResponseVariant::Real, NoiseSpec::default());
        a.response.params.sigma_on = (0.0, 0.0);
        let mut b = a.clone();
        b.response.variant = ResponseVariant::FakeStatic;
        let ca = render_clip(&scene, &a, 4).unwrap();
        let cb = render_clip(&scene, &b, 4).unwrap();
        assert_eq!(ca.frames, cb.frames);
        assert_ne!(ca.label, cb.label);
    }

    #[test]
    fn adaptive_face_lags_background() {
        let scene = make_scene(3, &SceneConfig::default()).unwrap();
        let r = ClipRenderer::new(scene, spec(ResponseVariant::FakeAdaptive, NoiseSpec::clean()), 1).unwrap();
        assert_eq!(r.face_sigmas()[0], 0.0);
        let bg = r.background_sigmas();
        let lag = 10;
        let expected = bg[5..15].iter().sum::<f64>() / lag as f64;
        assert!((r.face_sigmas()[15] - expected).abs() < 1e-15);
    }

    #[test]
    fn no_tremor_means_static_landmarks() {
        let scene = make_scene(3, &SceneConfig::default()).unwrap();
        let r = ClipRenderer::new(scene, spec(ResponseVariant::Real, NoiseSpec::default()), 2).unwrap();
        let lm = r.landmarks();
        assert!(lm.frames().iter().all(|f| f == lm.frame(0)));
    }

    #[test]
    fn too_short_rejected() {
        let scene = make_scene(3, &SceneConfig::default()).unwrap();
        let mut s = spec(ResponseVariant::Real, NoiseSpec::default());
        s.pattern.duration_s = 0.5;
        assert!(matches!(ClipRenderer::new(scene, s, 0), Err(Error::ClipTooShort { .. })));
    }
}
