//! Hand-tremor compensation: enlarged regions, IMU-driven region shifts and
//! landmark-centroid tracking. All offsets are whole pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RegionSet;
use crate::optics::{integrate_displacement, pixel_shift};
use crate::types::{Axis, ImuTrace, LandmarkSet, Region};

/// Jawline landmarks, 1-based.
pub const CONTOUR_LANDMARKS: std::ops::RangeInclusive<usize> = 1..=17;

pub const DEFAULT_EXPANDED_SIZE: usize = 300;
pub const DEFAULT_OBJECT_DISTANCE_M: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilizeMode {
    #[default]
    None,
    Expand,
    Imu,
    Centroid,
}

impl StabilizeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilizeMode::None => "none",
            StabilizeMode::Expand => "expand",
            StabilizeMode::Imu => "imu",
            StabilizeMode::Centroid => "centroid",
        }
    }
}

impl fmt::Display for StabilizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabilizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StabilizeMode::None),
            "expand" => Ok(StabilizeMode::Expand),
            "imu" => Ok(StabilizeMode::Imu),
            "centroid" => Ok(StabilizeMode::Centroid),
            other => Err(Error::invalid("stabilize mode", format!("{other:?} (expected none|expand|imu|centroid)"))),
        }
    }
}

/// Base regions plus one whole-pixel offset per frame, shared by all regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTrack {
    pub base: Vec<Region>,
    pub offsets: Vec<(i64, i64)>,
    pub width: usize,
    pub height: usize,
}

impl RegionTrack {
    pub fn identity(base: Vec<Region>, n_frames: usize, width: usize, height: usize) -> Self {
        Self {
            base,
            offsets: vec![(0, 0); n_frames],
            width,
            height,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.offsets.len()
    }

    /// Region `index` on `frame`, clamped inside the frame.
    pub fn region_at(&self, index: usize, frame: usize) -> Region {
        let (dx, dy) = self.offsets[frame];
        self.base[index].shifted(dx, dy, self.width, self.height)
    }

    pub fn frame_regions(&self, frame: usize) -> Vec<Region> {
        (0..self.base.len()).map(|i| self.region_at(i, frame)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.offsets.iter().all(|&o| o == (0, 0))
    }
}

/// Grows each region concentrically to `new_size`, shifting inward at the
/// frame edges.
pub fn expand_regions(regions: &RegionSet, new_size: usize, width: usize, height: usize) -> Result<RegionSet> {
    if new_size > width || new_size > height {
        return Err(Error::invalid(
            "expanded region size",
            format!("{new_size} does not fit a {width}x{height} frame"),
        ));
    }
    let mut out = regions.clone();
    for r in &mut out.regions {
        if new_size < r.region.w.max(r.region.h) {
            return Err(Error::invalid(
                "expanded region size",
                format!("{new_size} is smaller than the current {}x{}", r.region.w, r.region.h),
            ));
        }
        let (cx, cy) = r.region.center();
        r.region = Region::centered_square(cx, cy, new_size, width, height);
    }
    Ok(out)
}

/// Assumed camera-to-face geometry for converting IMU displacement to pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuGeometry {
    pub object_distance_m: f64,
    pub focal_length_px: f64,
}

/// Shifts regions against the camera's lateral motion measured by the IMU.
/// IMU x/y are taken to be aligned with image x (right) and y (down).
pub fn imu_stabilize(
    base: Vec<Region>,
    trace: &ImuTrace,
    fps: f64,
    n_frames: usize,
    geometry: ImuGeometry,
    (width, height): (usize, usize),
) -> Result<RegionTrack> {
    let ImuGeometry {
        object_distance_m,
        focal_length_px,
    } = geometry;
    let clip_s = n_frames.saturating_sub(1) as f64 / fps;
    let rate = trace.sample_rate_hz();
    if trace.duration_s() + 0.5 / rate < clip_s {
        return Err(Error::TraceTooShort {
            trace_s: trace.duration_s(),
            clip_s,
        });
    }
    let dx = integrate_displacement(trace, Axis::X).displacement;
    let dy = integrate_displacement(trace, Axis::Y).displacement;
    let offsets = (0..n_frames)
        .map(|k| {
            let i = ((k as f64 / fps * rate).round() as usize).min(trace.len() - 1);
            let px = pixel_shift(dx[i], object_distance_m, focal_length_px)?;
            let py = pixel_shift(dy[i], object_distance_m, focal_length_px)?;
            Ok(((-px).round() as i64, (-py).round() as i64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionTrack {
        base,
        offsets,
        width,
        height,
    })
}

fn contour_centroid(points: &[crate::types::Point]) -> (f64, f64) {
    let n = CONTOUR_LANDMARKS.count() as f64;
    let (sx, sy) = CONTOUR_LANDMARKS.fold((0.0, 0.0), |(sx, sy), i| (sx + points[i - 1].x, sy + points[i - 1].y));
    (sx / n, sy / n)
}

/// Follows the jawline centroid relative to frame 0.
pub fn centroid_stabilize(base: Vec<Region>, landmarks: &LandmarkSet, n_frames: usize, width: usize, height: usize) -> Result<RegionTrack> {
    landmarks.check_frame_count(n_frames)?;
    let c0 = contour_centroid(landmarks.frame(0));
    let offsets = landmarks
        .frames()
        .iter()
        .map(|f| {
            let c = contour_centroid(f);
            ((c.0 - c0.0).round() as i64, (c.1 - c0.1).round() as i64)
        })
        .collect();
    Ok(RegionTrack {
        base,
        offsets,
        width,
        height,
    })
}
