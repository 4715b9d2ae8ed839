//! Vibration probe: per-frame on/off schedule, the ideal variance square
//! wave used as spectral reference, randomized pattern draws, and period /
//! duty recovery from an observed variance sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{VarianceSequence, VibrationPattern};

/// Duty-cycle options the randomizer draws from.
pub const DUTY_OPTIONS: [f64; 3] = [0.2, 0.5, 0.8];

/// Shortest period the randomizer accepts, in seconds.
pub const MIN_RANDOM_PERIOD_S: f64 = 0.5;

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSchedule {
    /// `true` while the motor vibrates.
    pub states: Vec<bool>,
    pub fps: f64,
    pub pattern: VibrationPattern,
}

impl ProbeSchedule {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn on_fraction(&self) -> f64 {
        self.states.iter().filter(|&&s| s).count() as f64 / self.states.len().max(1) as f64
    }
}

/// Whether the motor is on at time `t_s`. Positions within 1e-9 of a cycle
/// or duty boundary are snapped so quantized patterns do not flicker.
pub fn is_on_at(pattern: &VibrationPattern, t_s: f64) -> bool {
    let mut cycles = (t_s - pattern.phase_s) / pattern.period_s;
    if (cycles - cycles.round()).abs() < SNAP {
        cycles = cycles.round();
    }
    let frac = cycles - cycles.floor();
    if (frac - pattern.duty).abs() < SNAP {
        return false;
    }
    frac < pattern.duty
}

pub fn schedule(pattern: &VibrationPattern, fps: f64, n_frames: usize) -> ProbeSchedule {
    let states = (0..n_frames).map(|k| is_on_at(pattern, k as f64 / fps)).collect();
    ProbeSchedule {
        states,
        fps,
        pattern: *pattern,
    }
}

/// Square wave with 1.0 while still (sharp, high variance) and 0.0 while
/// vibrating (blurred, low variance).
pub fn ideal_variance_sequence(pattern: &VibrationPattern, fps: f64, n_frames: usize) -> VarianceSequence {
    let values = schedule(pattern, fps, n_frames)
        .states
        .into_iter()
        .map(|on| if on { 0.0 } else { 1.0 })
        .collect();
    VarianceSequence { values, fps }
}

/// Draws a pattern: duty uniformly from [`DUTY_OPTIONS`], period uniformly
/// from `period_range_s` and then rounded to a whole number of frames.
/// Phase is zero so vibration starts with the capture.
pub fn randomize_pattern(seed: u64, period_range_s: (f64, f64), duration_s: f64, fps: f64) -> Result<VibrationPattern> {
    let (lo, hi) = period_range_s;
    if !(lo <= hi) {
        return Err(Error::invalid("period range", format!("empty range [{lo}, {hi}]")));
    }
    if lo < MIN_RANDOM_PERIOD_S - SNAP || hi > duration_s / 2.0 + SNAP {
        return Err(Error::invalid(
            "period range",
            format!(
                "[{lo}, {hi}] s must lie within [{MIN_RANDOM_PERIOD_S}, {}] s so two cycles fit",
                duration_s / 2.0
            ),
        ));
    }
    let lo_frames = (lo * fps - SNAP).ceil();
    let hi_frames = (hi * fps + SNAP).floor();
    if lo_frames > hi_frames {
        return Err(Error::invalid(
            "period range",
            format!("[{lo}, {hi}] s contains no whole-frame period at {fps} fps"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duty = DUTY_OPTIONS[rng.random_range(0..DUTY_OPTIONS.len())];
    let raw = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let frames = (raw * fps).round().clamp(lo_frames, hi_frames);
    let mut pattern = VibrationPattern::new(frames / fps, duty, duration_s, 0.0)?;
    pattern.seed = Some(seed);
    Ok(pattern)
}

/// Biased (divide-by-N) autocorrelation of the mean-removed sequence,
/// normalized so lag 0 equals 1. Returns all zeros for a constant input.
pub fn autocorrelation(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let energy: f64 = centered.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|lag| {
            centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / energy
        })
        .collect()
}

/// Share of the peak height above which lags count toward the peak centroid.
const PEAK_CENTROID_LEVEL: f64 = 0.9;

/// Estimates the probe period in frames from the strongest autocorrelation
/// peak after the first negative lobe. The lag is the weighted centroid of
/// the top tenth of the peak rather than its argmax: per-frame blur noise
/// makes the tip ragged, while the sides of the lobe stay symmetric.
/// `None` when no repeat is visible.
pub fn estimate_period_frames(values: &[f64]) -> Option<usize> {
    let ac = autocorrelation(values);
    let n = ac.len();
    let first_negative = (1..n).find(|&k| ac[k] < 0.0)?;
    let max_lag = n - n / 4;
    let top = (first_negative..max_lag.max(first_negative + 1).min(n))
        .max_by(|&a, &b| ac[a].total_cmp(&ac[b]).then(b.cmp(&a)))
        .filter(|&k| ac[k] > 0.0)?;
    let cut = ac[top] * PEAK_CENTROID_LEVEL;
    let mut lo = top;
    while lo > first_negative && ac[lo - 1] > cut {
        lo -= 1;
    }
    let mut hi = top;
    while hi + 1 < n && ac[hi + 1] > cut {
        hi += 1;
    }
    let (mut weight, mut moment) = (0.0, 0.0);
    for (k, &a) in ac.iter().enumerate().take(hi + 1).skip(lo) {
        weight += a - cut;
        moment += (a - cut) * k as f64;
    }
    if weight > 0.0 {
        Some((moment / weight).round() as usize)
    } else {
        Some(top)
    }
}

/// Quantile of the sequence taken as the still (OFF) variance level.
pub const DUTY_OFF_QUANTILE: f64 = 0.95;
/// Frames below this share of the OFF level count as vibrating.
pub const DUTY_ON_RATIO: f64 = 0.95;

/// Estimates the duty cycle as the fraction of frames whose variance falls
/// below [`DUTY_ON_RATIO`] of the still level. Blur strength varies from
/// frame to frame while vibrating, so ON frames spread far below the OFF
/// plateau and a min/max midpoint misplaces many of them.
/// `None` for empty or constant sequences.
pub fn estimate_duty(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let off = sorted[((sorted.len() - 1) as f64 * DUTY_OFF_QUANTILE).round() as usize];
    if !(off > sorted[0]) || !(off > 0.0) {
        return None;
    }
    let threshold = DUTY_ON_RATIO * off;
    Some(values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64)
}

/// Nearest entry of [`DUTY_OPTIONS`].
pub fn nearest_duty_option(duty: f64) -> f64 {
    DUTY_OPTIONS
        .iter()
        .copied()
        .min_by(|a, b| (a - duty).abs().total_cmp(&(b - duty).abs()))
        .expect("non-empty options")
}
