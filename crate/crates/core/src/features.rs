//! Blur features: the 3×3 mean-absolute-difference gradient map, per-region
//! variance, landmark-anchored region selection on the first frame, and
//! probe-filtered per-region feature vectors.
//!
//! Gradient values are kept as integer neighborhood sums `s` (so `g = s/9`)
//! inside the hot loops; region variance is then computed from exact integer
//! moments and rounded once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe;
use crate::spectral::{self, BinMask, MaskMode};
use crate::types::{FrameSequence, GrayFrame, LandmarkSet, Point, Region, VarianceSequence, VibrationPattern, LANDMARK_COUNT};

/// Eyebrows (18–28) and eyes (37–48), 1-based.
pub fn default_excluded_landmarks() -> Vec<usize> {
    (18..=28).chain(37..=48).collect()
}

pub const DEFAULT_REGION_SIZE: usize = 50;
pub const DEFAULT_REGION_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl GradientMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn region_mean(&self, region: &Region) -> f64 {
        let mut sum = 0.0;
        for y in region.y..region.y + region.h {
            sum += self.values[y * self.width + region.x..y * self.width + region.x + region.w]
                .iter()
                .sum::<f64>();
        }
        sum / region.area() as f64
    }
}

fn check_frame(frame: &GrayFrame) -> Result<()> {
    if frame.width() < 3 || frame.height() < 3 {
        return Err(Error::invalid(
            "frame",
            format!("{}x{} is smaller than 3x3", frame.width(), frame.height()),
        ));
    }
    Ok(())
}

/// Neighborhood sum `Σ|f[u,v] − f[i,j]|` over the 3×3 window for each pixel
/// of `region`; pixels on the frame's outer ring get 0.
fn gradient_sums(frame: &GrayFrame, region: &Region) -> Vec<u32> {
    let (w, h) = (frame.width(), frame.height());
    let data = frame.data();
    let mut out = vec![0u32; region.area()];
    for y in region.y..region.y + region.h {
        if y == 0 || y + 1 >= h {
            continue;
        }
        let up = &data[(y - 1) * w..y * w];
        let mid = &data[y * w..(y + 1) * w];
        let down = &data[(y + 1) * w..(y + 2) * w];
        let row_out = &mut out[(y - region.y) * region.w..(y - region.y + 1) * region.w];
        for x in region.x..region.x + region.w {
            if x == 0 || x + 1 >= w {
                continue;
            }
            let c = mid[x] as i32;
            let mut s = 0i32;
            for row in [up, mid, down] {
                s += (row[x - 1] as i32 - c).abs() + (row[x] as i32 - c).abs() + (row[x + 1] as i32 - c).abs();
            }
            row_out[x - region.x] = s as u32;
        }
    }
    out
}

/// Zeroes sums whose gradient is below a tenth of the largest one.
fn threshold_sums(sums: &mut [u32]) {
    let max = sums.iter().copied().max().unwrap_or(0);
    let cut = max as f64 / 9.0 / 10.0;
    for s in sums.iter_mut() {
        if (*s as f64 / 9.0) < cut {
            *s = 0;
        }
    }
}

/// `g[i,j] = (1/9)·Σ|f[u,v] − f[i,j]|` over the 3×3 neighborhood; the outer
/// ring is 0. With `threshold`, values below `max(g)/10` are zeroed.
pub fn gradient_map(frame: &GrayFrame, threshold: bool) -> Result<GradientMap> {
    check_frame(frame)?;
    let full = Region::new(0, 0, frame.width(), frame.height());
    let mut sums = gradient_sums(frame, &full);
    if threshold {
        threshold_sums(&mut sums);
    }
    Ok(GradientMap {
        width: frame.width(),
        height: frame.height(),
        values: sums.into_iter().map(|s| s as f64 / 9.0).collect(),
    })
}

/// Population variance from integer moments, divided by `scale²`.
fn variance_from_integers(values: impl Iterator<Item = u64>, scale: f64) -> f64 {
    let (mut n, mut s1, mut s2) = (0u128, 0u128, 0u128);
    for v in values {
        let v = v as u128;
        n += 1;
        s1 += v;
        s2 += v * v;
    }
    if n == 0 {
        return 0.0;
    }
    let numerator = n * s2 - s1 * s1;
    numerator as f64 / (n as f64 * n as f64) / (scale * scale)
}

/// Population variance of the region's pixels. With `use_gradient` the
/// samples are the region's thresholded gradient values (threshold relative
/// to the region's own maximum), otherwise raw gray levels.
pub fn region_variance(frame: &GrayFrame, region: &Region, use_gradient: bool) -> Result<f64> {
    check_frame(frame)?;
    region.check_bounds(frame.width(), frame.height())?;
    Ok(region_variance_unchecked(frame, region, use_gradient))
}

fn region_variance_unchecked(frame: &GrayFrame, region: &Region, use_gradient: bool) -> f64 {
    if use_gradient {
        let mut sums = gradient_sums(frame, region);
        threshold_sums(&mut sums);
        variance_from_integers(sums.into_iter().map(u64::from), 9.0)
    } else {
        let pixels = (region.y..region.y + region.h)
            .flat_map(|y| frame.row(y)[region.x..region.x + region.w].iter().map(|&v| v as u64));
        variance_from_integers(pixels, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedRegion {
    /// 1-based landmark the region is centered on.
    pub anchor: usize,
    pub region: Region,
    pub mean_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<SelectedRegion>,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn boxes(&self) -> Vec<Region> {
        self.regions.iter().map(|r| r.region).collect()
    }
}

/// Centers a `region_size` square on every non-excluded landmark, scores it
/// by mean thresholded gradient of `first_frame`, and keeps the `n` best.
/// Ties go to the lower landmark index.
pub fn select_regions(
    first_frame: &GrayFrame,
    landmarks: &[Point; LANDMARK_COUNT],
    region_size: usize,
    n: usize,
    excluded: &[usize],
) -> Result<RegionSet> {
    if n == 0 {
        return Err(Error::invalid("region count", "need at least one region"));
    }
    if region_size < Region::MIN_SIDE {
        return Err(Error::invalid("region size", format!("{region_size} is below {}", Region::MIN_SIDE)));
    }
    let map = gradient_map(first_frame, true)?;
    let (w, h) = (first_frame.width(), first_frame.height());
    let mut candidates: Vec<SelectedRegion> = (1..=LANDMARK_COUNT)
        .filter(|i| !excluded.contains(i))
        .map(|anchor| {
            let p = landmarks[anchor - 1];
            let region = Region::centered_square(p.x, p.y, region_size, w, h);
            SelectedRegion {
                anchor,
                region,
                mean_gradient: map.region_mean(&region),
            }
        })
        .collect();
    if candidates.len() < n {
        return Err(Error::NotEnoughCandidates {
            requested: n,
            available: candidates.len(),
        });
    }
    candidates.sort_by(|a, b| {
        b.mean_gradient
            .total_cmp(&a.mean_gradient)
            .then(a.anchor.cmp(&b.anchor))
    });
    candidates.truncate(n);
    Ok(RegionSet { regions: candidates })
}

/// Per-frame gradient variance over a fixed region.
pub fn variance_sequence(clip: &FrameSequence, region: &Region) -> Result<VarianceSequence> {
    variance_sequence_tracked(clip, |_| *region, true)
}

/// Per-frame variance where the region may move from frame to frame.
pub fn variance_sequence_tracked(
    clip: &FrameSequence,
    region_at: impl Fn(usize) -> Region,
    use_gradient: bool,
) -> Result<VarianceSequence> {
    let (w, h) = (clip.width(), clip.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid("frame", format!("{w}x{h} is smaller than 3x3")));
    }
    let mut values = Vec::with_capacity(clip.len());
    for (i, frame) in clip.frames().iter().enumerate() {
        let region = region_at(i);
        region.check_bounds(w, h)?;
        values.push(region_variance_unchecked(frame, &region, use_gradient));
    }
    VarianceSequence::new(values, clip.fps().as_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub region_size: usize,
    pub n_regions: usize,
    pub excluded: Vec<usize>,
    pub mask_mode: MaskMode,
    /// Gradient variance (default) or raw-pixel variance.
    pub use_gradient: bool,
    pub normalize: Normalize,
}

/// Per-sequence scaling applied before probe filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    /// Filter the raw variance values.
    None,
    /// Divide by the sequence mean.
    Mean,
    /// `ln(v / mean)`, floored at [`LOG_FLOOR`]. Blur scales variance
    /// multiplicatively, so this turns the ON/OFF contrast into a level
    /// shift that does not depend on scene contrast.
    #[default]
    Log,
}

impl std::str::FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "mean" => Ok(Self::Mean),
            "log" => Ok(Self::Log),
            _ => Err(Error::invalid("normalize", format!("unknown mode {s:?} (none|mean|log)"))),
        }
    }
}

pub const LOG_FLOOR: f64 = 1e-6;

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            region_size: DEFAULT_REGION_SIZE,
            n_regions: DEFAULT_REGION_COUNT,
            excluded: default_excluded_landmarks(),
            mask_mode: MaskMode::Energy,
            use_gradient: true,
            normalize: Normalize::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub anchor: usize,
    pub region: Region,
    pub values: Vec<f64>,
}

/// Ideal square wave and its retained-bin mask for a clip of `n_frames`.
pub fn probe_reference(pattern: &VibrationPattern, fps: f64, n_frames: usize, mode: MaskMode) -> Result<(Vec<f64>, BinMask)> {
    let ideal = probe::ideal_variance_sequence(pattern, fps, n_frames).values;
    let mask = spectral::ideal_mask(&ideal, mode)?;
    Ok((ideal, mask))
}

/// Normalizes and probe-filters one variance sequence. A sequence with
/// non-positive mean yields all zeros under `Mean` and `Log`.
pub fn feature_values(sequence: &[f64], mask: &BinMask, normalize: Normalize) -> Result<Vec<f64>> {
    if normalize == Normalize::None {
        return spectral::filter_sequence(sequence, mask);
    }
    let mean = sequence.iter().sum::<f64>() / sequence.len().max(1) as f64;
    if !(mean > 0.0) {
        return Ok(vec![0.0; sequence.len()]);
    }
    let scaled: Vec<f64> = match normalize {
        Normalize::Log => sequence.iter().map(|v| (v / mean).max(LOG_FLOOR).ln()).collect(),
        _ => sequence.iter().map(|v| v / mean).collect(),
    };
    spectral::filter_sequence(&scaled, mask)
}

/// Select regions on frame 0, compute each region's variance sequence, and
/// filter it against the pattern's ideal spectrum.
pub fn extract_features(
    clip: &FrameSequence,
    landmarks: &LandmarkSet,
    pattern: &VibrationPattern,
    config: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    landmarks.check_frame_count(clip.len())?;
    let regions = select_regions(
        &clip.frames()[0],
        landmarks.frame(0),
        config.region_size,
        config.n_regions,
        &config.excluded,
    )?;
    let sequences = regions
        .regions
        .par_iter()
        .map(|r| variance_sequence_tracked(clip, |_| r.region, config.use_gradient))
        .collect::<Result<Vec<_>>>()?;
    let (_, mask) = probe_reference(pattern, clip.fps().as_f64(), clip.len(), config.mask_mode)?;
    regions
        .regions
        .iter()
        .zip(sequences)
        .map(|(r, seq)| {
            Ok(FeatureVector {
                anchor: r.anchor,
                region: r.region,
                values: feature_values(&seq.values, &mask, config.normalize)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frame_has_zero_gradient() {
        let f = GrayFrame::filled(8, 8, 77);
        assert!(gradient_map(&f, true).unwrap().values.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn center_impulse() {
        let f = GrayFrame::from_fn(3, 3, |x, y| if x == 1 && y == 1 { 9 } else { 0 });
        let g = gradient_map(&f, false).unwrap();
        assert_eq!(g.get(1, 1), 8.0);
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn tiny_frame_rejected() {
        let f = GrayFrame::filled(2, 5, 0);
        assert!(gradient_map(&f, false).is_err());
    }

    #[test]
    fn raw_variance_hand_example() {
        let f = GrayFrame::from_fn(4, 4, |x, _| if x < 2 { 0 } else { 100 });
        let v = region_variance(&f, &Region::new(1, 0, 2, 2), false).unwrap();
        assert_eq!(v, 2500.0);
        assert_eq!(region_variance(&GrayFrame::filled(9, 9, 3), &Region::new(0, 0, 9, 9), false).unwrap(), 0.0);
    }

    #[test]
    fn region_out_of_bounds() {
        let f = GrayFrame::filled(10, 10, 0);
        assert!(matches!(
            region_variance(&f, &Region::new(5, 5, 6, 3), true),
            Err(Error::RegionOutOfBounds { .. })
        ));
    }

    #[test]
    fn uniform_frame_selects_first_allowed_landmarks() {
        let f = GrayFrame::filled(64, 64, 50);
        let pts = [Point::new(32.0, 32.0); LANDMARK_COUNT];
        let set = select_regions(&f, &pts, 10, 3, &default_excluded_landmarks()).unwrap();
        let anchors: Vec<usize> = set.regions.iter().map(|r| r.anchor).collect();
        assert_eq!(anchors, vec![1, 2, 3]);
        let set = select_regions(&f, &pts, 10, 3, &[1, 3]).unwrap();
        assert_eq!(set.regions.iter().map(|r| r.anchor).collect::<Vec<_>>(), vec![2, 4, 5]);
    }

    #[test]
    fn too_many_regions_requested() {
        let f = GrayFrame::filled(64, 64, 50);
        let pts = [Point::new(32.0, 32.0); LANDMARK_COUNT];
        let excluded: Vec<usize> = (1..=66).collect();
        assert!(matches!(
            select_regions(&f, &pts, 10, 3, &excluded),
            Err(Error::NotEnoughCandidates { requested: 3, available: 2 })
        ));
    }
}
