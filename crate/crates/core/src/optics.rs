//! Physical model of the probe: phone displacement from accelerometer
//! samples, thin-lens imaging, defocus circle-of-confusion radii, and the
//! similar-triangles pixel shift used to re-aim regions from IMU data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Axis, ImuTrace};

/// Airy-disk diameter quoted for an f/1.8 phone camera, in meters.
///
/// Reference value only. It does not follow from the Rayleigh criterion at
/// visible wavelengths, so nothing in this crate computes with it.
pub const QUOTED_AIRY_DISK_DIAMETER_M: f64 = 0.87e-6;

/// Sensor pixel size of the reference phone camera, in meters.
pub const REFERENCE_PIXEL_PITCH_M: f64 = 0.8e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensConfig {
    pub focal_length_m: f64,
    /// Dimensionless f-number; the aperture diameter is `focal_length_m / f_number`.
    pub f_number: f64,
    pub pixel_pitch_m: f64,
}

impl LensConfig {
    pub fn new(focal_length_m: f64, f_number: f64, pixel_pitch_m: f64) -> Result<Self> {
        if !(focal_length_m > 0.0 && focal_length_m.is_finite()) {
            return Err(Error::invalid("lens", format!("focal length {focal_length_m} m")));
        }
        if !(f_number > 0.0 && f_number.is_finite()) {
            return Err(Error::invalid("lens", format!("f-number {f_number}")));
        }
        if !(pixel_pitch_m > 0.0 && pixel_pitch_m.is_finite()) {
            return Err(Error::invalid("lens", format!("pixel pitch {pixel_pitch_m} m")));
        }
        Ok(Self {
            focal_length_m,
            f_number,
            pixel_pitch_m,
        })
    }

    /// 26 mm, f/1.8, 0.8 µm pixels.
    pub fn reference_phone() -> Self {
        Self {
            focal_length_m: 0.026,
            f_number: 1.8,
            pixel_pitch_m: REFERENCE_PIXEL_PITCH_M,
        }
    }

    pub fn aperture_diameter_m(&self) -> f64 {
        self.focal_length_m / self.f_number
    }

    /// Focal length expressed in sensor pixels.
    pub fn focal_length_px(&self) -> f64 {
        self.focal_length_m / self.pixel_pitch_m
    }
}

/// Velocity and displacement along one axis, one entry per IMU sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSeries {
    pub axis: Axis,
    pub dt: f64,
    pub velocity: Vec<f64>,
    pub displacement: Vec<f64>,
}

impl DisplacementSeries {
    pub fn len(&self) -> usize {
        self.displacement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement.is_empty()
    }

    pub fn peak_abs(&self) -> f64 {
        self.displacement.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// Explicit Euler double integration starting from rest:
/// `V[i+1] = V[i] + a[i]·dt`, `D[i+1] = D[i] + V[i]·dt`, `D[0] = V[0] = 0`.
pub fn integrate_displacement(trace: &ImuTrace, axis: Axis) -> DisplacementSeries {
    let dt = trace.dt();
    let n = trace.len();
    let k = axis.index();
    let mut velocity = Vec::with_capacity(n);
    let mut displacement = Vec::with_capacity(n);
    let (mut v, mut d) = (0.0f64, 0.0f64);
    for sample in trace.samples() {
        velocity.push(v);
        displacement.push(d);
        let a = sample[k];
        d += v * dt;
        v += a * dt;
    }
    DisplacementSeries {
        axis,
        dt,
        velocity,
        displacement,
    }
}

fn check_object_distance(lens: &LensConfig, u: f64) -> Result<()> {
    if !(u > lens.focal_length_m) || !u.is_finite() {
        return Err(Error::InsideFocalLength {
            u,
            f: lens.focal_length_m,
        });
    }
    Ok(())
}

/// Thin-lens image distance `w = f·u / (u − f)`.
pub fn image_distance(lens: &LensConfig, u: f64) -> Result<f64> {
    check_object_distance(lens, u)?;
    let f = lens.focal_length_m;
    Ok(f * u / (u - f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    /// Object point moves toward the lens (distance `u − δ`).
    Toward,
    /// Object point moves away from the lens (distance `u + δ`).
    Away,
}

/// Circle-of-confusion radius, in meters, when the focused object point at
/// distance `u` moves by `delta_u` along the optical axis.
///
/// Toward: `f²(u − u₂) / (F(u − f)u₂)` with `u₂ = u − δ`.
/// Away: `f²(u₁ − u) / (F(u − f)u₁)` with `u₁ = u + δ`.
pub fn coc_radius(lens: &LensConfig, u: f64, delta_u: f64, direction: ShiftDirection) -> Result<f64> {
    check_object_distance(lens, u)?;
    let f = lens.focal_length_m;
    if !(delta_u >= 0.0 && delta_u < u - f) {
        return Err(Error::invalid(
            "object shift",
            format!("delta_u = {delta_u} m must lie in [0, u - f) = [0, {})", u - f),
        ));
    }
    let big_f = lens.f_number;
    Ok(match direction {
        ShiftDirection::Toward => {
            let u2 = u - delta_u;
            f * f * (u - u2) / (big_f * (u - f) * u2)
        }
        ShiftDirection::Away => {
            let u1 = u + delta_u;
            f * f * (u1 - u) / (big_f * (u - f) * u1)
        }
    })
}

/// Similar-triangles image shift `p = (d / D)·f` in pixels, signed like `d`.
pub fn pixel_shift(camera_displacement_m: f64, object_distance_m: f64, focal_length_px: f64) -> Result<f64> {
    if !(object_distance_m > 0.0) {
        return Err(Error::invalid(
            "object distance",
            format!("{object_distance_m} m must be > 0"),
        ));
    }
    Ok(camera_displacement_m / object_distance_m * focal_length_px)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(a: [f64; 3], n: usize, rate: f64) -> ImuTrace {
        ImuTrace::new(vec![a; n], rate).unwrap()
    }

    #[test]
    fn zero_acceleration_stays_put() {
        let d = integrate_displacement(&trace([0.0; 3], 50, 400.0), Axis::Z);
        assert!(d.displacement.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_acceleration_closed_form() {
        let d = integrate_displacement(&trace([0.0, 0.0, 1.0], 10, 100.0), Axis::Z);
        assert!((d.displacement[3] - 3.0e-4).abs() < 1e-15);
        assert_eq!(d.displacement[0], 0.0);
        assert_eq!(d.displacement[1], 0.0);
    }

    #[test]
    fn image_distance_examples() {
        let lens = LensConfig::reference_phone();
        let w = image_distance(&lens, 0.1).unwrap();
        assert!((w - 0.026 * 0.1 / 0.074).abs() < 1e-15);
        assert!((w * 1e3 - 35.135).abs() < 1e-3);
        let w2 = image_distance(&lens, 2.0 * 0.026).unwrap();
        assert!((w2 - 0.052).abs() < 1e-15);
        let far = image_distance(&lens, 1e6 * 0.026).unwrap();
        assert!((far - 0.026).abs() / 0.026 < 1e-4);
        assert!(matches!(image_distance(&lens, 0.026), Err(Error::InsideFocalLength { .. })));
        assert!(image_distance(&lens, 0.01).unwrap_err().to_string().contains("object inside focal length"));
    }

    #[test]
    fn coc_zero_shift_is_zero() {
        let lens = LensConfig::reference_phone();
        for dir in [ShiftDirection::Toward, ShiftDirection::Away] {
            assert_eq!(coc_radius(&lens, 0.1, 0.0, dir).unwrap(), 0.0);
        }
    }

    #[test]
    fn coc_rejects_large_shift() {
        let lens = LensConfig::reference_phone();
        assert!(coc_radius(&lens, 0.1, 0.08, ShiftDirection::Toward).is_err());
        assert!(coc_radius(&lens, 0.1, -1e-6, ShiftDirection::Away).is_err());
    }

    #[test]
    fn pixel_shift_examples() {
        assert_eq!(pixel_shift(0.0, 0.2, 1000.0).unwrap(), 0.0);
        assert!((pixel_shift(1e-3, 0.2, 1000.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((pixel_shift(-1e-3, 0.2, 1000.0).unwrap() + 5.0).abs() < 1e-12);
        assert!(pixel_shift(1e-3, 0.0, 1000.0).is_err());
    }
}
