//! Domain types shared across the pipeline.
//!
//! Every constructor validates its invariants, so a value of one of these
//! types that exists is usable downstream without further checks.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of points in the standard facial landmark layout.
pub const LANDMARK_COUNT: usize = 68;

/// The probe: a rectangular on/off vibration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationPattern {
    pub period_s: f64,
    pub duty: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub phase_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl VibrationPattern {
    pub fn new(period_s: f64, duty: f64, duration_s: f64, phase_s: f64) -> Result<Self> {
        let pattern = Self {
            period_s,
            duty,
            duration_s,
            phase_s,
            seed: None,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return Err(Error::invalid("pattern", format!("period_s must be > 0, got {}", self.period_s)));
        }
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(Error::invalid("pattern", format!("duty must lie in [0, 1], got {}", self.duty)));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("pattern", format!("duration_s must be > 0, got {}", self.duration_s)));
        }
        if !(self.phase_s.is_finite() && self.phase_s >= 0.0) {
            return Err(Error::invalid("pattern", format!("phase_s must be >= 0, got {}", self.phase_s)));
        }
        Ok(())
    }

    /// At least one full cycle fits, which spectral analysis requires.
    pub fn has_full_cycle(&self) -> bool {
        self.duration_s + 1e-9 >= self.period_s
    }
}

/// Frame rate stored as a rational so long clips do not drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid("fps", format!("{num}/{den} is not positive")));
        }
        Ok(Self { num, den })
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Number of frames in `duration_s` seconds, rounded to the nearest frame.
    pub fn frames_in(self, duration_s: f64) -> usize {
        (duration_s * self.as_f64()).round().max(0.0) as usize
    }
}

impl Default for Fps {
    fn default() -> Self {
        Self { num: 30, den: 1 }
    }
}

/// Single-channel 8-bit image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame", "width and height must be nonzero"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(
                "frame",
                format!("{} bytes for a {width}x{height} frame", data.len()),
            ));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as u64).sum::<u64>() as f64 / self.data.len() as f64
    }
}

/// A grayscale clip: the unit of detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<GrayFrame>,
    fps: Fps,
    width: usize,
    height: usize,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>, fps: Fps) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("frame sequence", "no frames"))?;
        let (width, height) = (first.width(), first.height());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != width || f.height() != height {
                return Err(Error::InconsistentDimensions {
                    frame: i,
                    expected_w: width,
                    expected_h: height,
                    found_w: f.width(),
                    found_h: f.height(),
                });
            }
        }
        Ok(Self {
            frames,
            fps,
            width,
            height,
        })
    }

    pub fn frames(&self) -> &[GrayFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps.as_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Per-frame 68-point facial landmarks. Indices are 1-based on every
/// public accessor, matching the standard layout numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    frames: Vec<[Point; LANDMARK_COUNT]>,
}

impl LandmarkSet {
    pub fn new(frames: Vec<[Point; LANDMARK_COUNT]>) -> Self {
        Self { frames }
    }

    /// Builds a set from loosely-typed per-frame point lists, rejecting any
    /// frame that does not carry exactly 68 points.
    pub fn from_points(frames: Vec<Vec<Point>>) -> Result<Self> {
        let mut out = Vec::with_capacity(frames.len());
        for (i, pts) in frames.into_iter().enumerate() {
            let arr: [Point; LANDMARK_COUNT] = pts
                .try_into()
                .map_err(|v: Vec<Point>| Error::LandmarkCount {
                    frame: i,
                    count: v.len(),
                })?;
            out.push(arr);
        }
        Ok(Self { frames: out })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, frame: usize) -> &[Point; LANDMARK_COUNT] {
        &self.frames[frame]
    }

    pub fn frames(&self) -> &[[Point; LANDMARK_COUNT]] {
        &self.frames
    }

    /// Landmark `index` (1..=68) on `frame`.
    pub fn point(&self, frame: usize, index: usize) -> Point {
        assert!((1..=LANDMARK_COUNT).contains(&index), "landmark index {index} outside 1..=68");
        self.frames[frame][index - 1]
    }

    /// Clamps every coordinate into `[0, width-1] x [0, height-1]`.
    pub fn clamped(mut self, width: usize, height: usize) -> Self {
        let (mx, my) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
        for frame in &mut self.frames {
            for p in frame.iter_mut() {
                p.x = p.x.clamp(0.0, mx);
                p.y = p.y.clamp(0.0, my);
            }
        }
        self
    }

    pub fn check_frame_count(&self, clip_frames: usize) -> Result<()> {
        if self.frames.len() != clip_frames {
            return Err(Error::FrameCountMismatch {
                what: "landmark set",
                expected: clip_frames,
                found: self.frames.len(),
            });
        }
        Ok(())
    }
}

impl Serialize for LandmarkSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self
            .frames
            .iter()
            .map(|f| f.iter().map(|p| [p.x, p.y]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LandmarkSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let frames = rows
            .into_iter()
            .map(|r| r.into_iter().map(|[x, y]| Point::new(x, y)).collect())
            .collect();
        LandmarkSet::from_points(frames).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned pixel rectangle, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub const MIN_SIDE: usize = 3;

    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    /// Square of side `size` centered on `(cx, cy)`, shifted inward so it
    /// lies fully inside the frame. Shrinks only if the frame itself is
    /// smaller than `size`.
    pub fn centered_square(cx: f64, cy: f64, size: usize, width: usize, height: usize) -> Self {
        let w = size.min(width);
        let h = size.min(height);
        let x = place(cx, w, width);
        let y = place(cy, h, height);
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 || !self.fits(width, height) {
            return Err(Error::RegionOutOfBounds {
                x: self.x,
                y: self.y,
                w: self.w,
                h: self.h,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Translates by whole pixels, then clamps back inside the frame
    /// without changing the size.
    pub fn shifted(&self, dx: i64, dy: i64, width: usize, height: usize) -> Self {
        let clamp = |start: usize, delta: i64, len: usize, limit: usize| -> usize {
            let max_start = limit.saturating_sub(len) as i64;
            (start as i64 + delta).clamp(0, max_start) as usize
        };
        Self {
            x: clamp(self.x, dx, self.w, width),
            y: clamp(self.y, dy, self.h, height),
            w: self.w.min(width),
            h: self.h.min(height),
        }
    }
}

fn place(center: f64, len: usize, limit: usize) -> usize {
    let start = (center - len as f64 / 2.0).round();
    let max_start = limit.saturating_sub(len) as f64;
    start.clamp(0.0, max_start) as usize
}

/// Accelerometer samples in m/s² at a uniform rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuTrace {
    samples: Vec<[f64; 3]>,
    sample_rate_hz: f64,
}

impl ImuTrace {
    pub fn new(samples: Vec<[f64; 3]>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::invalid("IMU trace", format!("sample rate {sample_rate_hz} Hz")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Timestamp of the last sample.
    pub fn duration_s(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.sample_rate_hz
    }
}

/// Accelerometer axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Per-frame blur measure over one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSequence {
    pub values: Vec<f64>,
    pub fps: f64,
}

impl VarianceSequence {
    pub fn new(values: Vec<f64>, fps: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("variance sequence", format!("value {v} is not a nonnegative number")));
        }
        Ok(Self { values, fps })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Binary class of a clip or region. Fake is the positive class, so scores
/// read as fakeness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Real,
    Fake,
}

impl Verdict {
    pub fn from_score(score: f64) -> Self {
        if score >= 0.5 {
            Verdict::Fake
        } else {
            Verdict::Real
        }
    }

    pub fn target(self) -> f64 {
        match self {
            Verdict::Real => 0.0,
            Verdict::Fake => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Real => "real",
            Verdict::Fake => "fake",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVote {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub vote: Verdict,
    pub score: f64,
}

impl RegionVote {
    pub fn region(&self) -> Region {
        Region::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub score: f64,
    pub pos: f64,
    pub pattern: VibrationPattern,
    pub regions: Vec<RegionVote>,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix_s: Option<u64>,
}

impl DetectionReport {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) || !(0.0..=1.0).contains(&self.pos) {
            return Err(Error::invalid("report", "score and pos must lie in [0, 1]"));
        }
        let fakes = self.regions.iter().filter(|r| r.vote == Verdict::Fake).count();
        let majority = if 2 * fakes > self.regions.len() {
            Verdict::Fake
        } else {
            Verdict::Real
        };
        if !self.regions.is_empty() && majority != self.verdict {
            return Err(Error::invalid("report", "verdict disagrees with the region majority"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_rejects_bad_duty() {
        assert!(VibrationPattern::new(1.0, 1.2, 4.0, 0.0).is_err());
        assert!(VibrationPattern::new(0.0, 0.5, 4.0, 0.0).is_err());
        assert!(VibrationPattern::new(1.0, 0.5, 4.0, 0.0).is_ok());
    }

    #[test]
    fn centered_square_shifts_inward() {
        let r = Region::centered_square(2.0, 2.0, 50, 256, 256);
        assert_eq!(r, Region::new(0, 0, 50, 50));
        let r = Region::centered_square(255.0, 128.0, 50, 256, 256);
        assert_eq!(r, Region::new(206, 103, 50, 50));
        let r = Region::centered_square(10.0, 10.0, 300, 256, 200);
        assert_eq!((r.w, r.h), (256, 200));
    }

    #[test]
    fn shifted_clamps() {
        let r = Region::new(10, 10, 50, 50);
        assert_eq!(r.shifted(-20, 5, 100, 100), Region::new(0, 15, 50, 50));
        assert_eq!(r.shifted(100, 100, 100, 100), Region::new(50, 50, 50, 50));
    }

    #[test]
    fn landmark_count_error_names_frame() {
        let mut frames = vec![vec![Point::default(); 68]; 5];
        frames[3].pop();
        match LandmarkSet::from_points(frames) {
            Err(Error::LandmarkCount { frame, count }) => {
                assert_eq!((frame, count), (3, 67));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn verdict_threshold() {
        assert_eq!(Verdict::from_score(0.5), Verdict::Fake);
        assert_eq!(Verdict::from_score(0.4999), Verdict::Real);
        assert_eq!(serde_json::to_string(&Verdict::Real).unwrap(), "\"real\"");
    }
}
