//! Frequency-domain consistency between an observed variance sequence and
//! the probe's ideal square wave.
//!
//! The DFT is a direct O(N²) evaluation with an exact-index twiddle table,
//! so any length works (120, 150 and 180 frames are all common) and the
//! round-trip error stays near machine precision.
//!
//! Bins are indexed `0..N`. The "support" of a sequence is its set of
//! positive-frequency bins `1..=N/2` whose magnitude exceeds
//! [`NONZERO_EPS`] times the largest magnitude over bins `0..=N/2`. DC is
//! never part of a support or a mask (it only carries mean brightness) but
//! it does set the scale, so round-off in a constant sequence's spectrum
//! does not count as support.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative magnitude below which a bin counts as zero.
pub const NONZERO_EPS: f64 = 1e-9;

/// Fraction of the ideal spectrum the mask must retain.
pub const MASK_COVERAGE: f64 = 0.80;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// Positive-frequency bins `1..=N/2`.
    pub fn positive_bins(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.bins.len() / 2
    }
}

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let angle = sign * 2.0 * PI * m as f64 / n as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

fn transform(input: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = input.len();
    let table = twiddles(n, sign);
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for x in input {
                acc += x * table[idx];
                idx += k;
                if idx >= n {
                    idx -= n;
                }
            }
            acc
        })
        .collect()
}

/// `X[k] = Σ x[n]·exp(−2πikn/N)`.
pub fn dft(values: &[f64]) -> Result<Spectrum> {
    if values.len() < 2 {
        return Err(Error::invalid("sequence", format!("DFT needs at least 2 samples, got {}", values.len())));
    }
    let input: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(Spectrum {
        bins: transform(&input, -1.0),
    })
}

/// Inverse DFT with the 1/N normalization; complex output.
pub fn idft(spectrum: &Spectrum) -> Vec<Complex64> {
    let n = spectrum.bins.len() as f64;
    transform(&spectrum.bins, 1.0).into_iter().map(|c| c / n).collect()
}

/// Positive-frequency bins whose magnitude is non-zero in the relative sense.
pub fn support(spectrum: &Spectrum) -> Vec<usize> {
    let mags = spectrum.magnitudes();
    let max = (0..=spectrum.bins.len() / 2).map(|k| mags[k]).fold(0.0f64, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    spectrum
        .positive_bins()
        .filter(|&k| mags[k] > NONZERO_EPS * max)
        .collect()
}

/// How the "top 80%" of the ideal spectrum is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Smallest magnitude-ranked prefix covering 80% of total magnitude.
    #[default]
    Energy,
    /// The `ceil(0.8·|support|)` largest bins.
    Count,
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(MaskMode::Energy),
            "count" => Ok(MaskMode::Count),
            other => Err(Error::invalid("mask mode", format!("{other:?} (expected energy|count)"))),
        }
    }
}

/// Retained positive-frequency bins, in rank order (largest magnitude first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMask {
    pub len: usize,
    pub bins: Vec<usize>,
}

impl BinMask {
    pub fn new(len: usize, bins: Vec<usize>) -> Result<Self> {
        if let Some(&b) = bins.iter().find(|&&b| b == 0 || b > len / 2) {
            return Err(Error::invalid("bin mask", format!("bin {b} outside 1..={}", len / 2)));
        }
        Ok(Self { len, bins })
    }

    /// Every positive-frequency bin.
    pub fn all(len: usize) -> Self {
        Self {
            len,
            bins: (1..=len / 2).collect(),
        }
    }

    pub fn contains(&self, bin: usize) -> bool {
        let k = if bin > self.len / 2 { self.len - bin } else { bin };
        k != 0 && self.bins.contains(&k)
    }
}

pub fn ideal_mask(ideal: &[f64], mode: MaskMode) -> Result<BinMask> {
    let spectrum = dft(ideal)?;
    let mags = spectrum.magnitudes();
    let mut ranked = support(&spectrum);
    if ranked.is_empty() {
        return Err(Error::NoSpectralSupport);
    }
    ranked.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let keep = match mode {
        MaskMode::Energy => {
            let total: f64 = ranked.iter().map(|&k| mags[k]).sum();
            let mut acc = 0.0;
            ranked
                .iter()
                .position(|&k| {
                    acc += mags[k];
                    acc >= MASK_COVERAGE * total
                })
                .map_or(ranked.len(), |i| i + 1)
        }
        MaskMode::Count => (MASK_COVERAGE * ranked.len() as f64 - 1e-9).ceil() as usize,
    };
    ranked.truncate(keep.max(1));
    BinMask::new(ideal.len(), ranked)
}

/// Zeroes every bin outside the mask (and its conjugates), keeps DC, and
/// returns the real part of the inverse transform.
pub fn filter_sequence(actual: &[f64], mask: &BinMask) -> Result<Vec<f64>> {
    if actual.len() != mask.len {
        return Err(Error::DimensionMismatch {
            expected: mask.len,
            found: actual.len(),
        });
    }
    let mut spectrum = dft(actual)?;
    for (k, bin) in spectrum.bins.iter_mut().enumerate() {
        if k != 0 && !mask.contains(k) {
            *bin = Complex64::new(0.0, 0.0);
        }
    }
    Ok(idft(&spectrum).into_iter().map(|c| c.re).collect())
}

/// Share of the actual sequence's positive-frequency magnitude that falls
/// on the ideal sequence's support. Zero when the actual sequence carries
/// no positive-frequency magnitude at all.
pub fn pos(actual: &[f64], ideal: &[f64]) -> Result<f64> {
    if actual.len() != ideal.len() {
        return Err(Error::DimensionMismatch {
            expected: ideal.len(),
            found: actual.len(),
        });
    }
    let ideal_spec = dft(ideal)?;
    let on_support = support(&ideal_spec);
    if on_support.is_empty() {
        return Err(Error::NoSpectralSupport);
    }
    let actual_mags = dft(actual)?.magnitudes();
    let total: f64 = (1..=actual.len() / 2).map(|k| actual_mags[k]).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let inside: f64 = on_support.iter().map(|&k| actual_mags[k]).sum();
    Ok((inside / total).clamp(0.0, 1.0))
}

/// Pearson correlation; zero if either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize, period: usize, duty: f64) -> Vec<f64> {
        (0..n)
            .map(|k| if ((k % period) as f64) < duty * period as f64 { 0.0 } else { 1.0 })
            .collect()
    }

    #[test]
    fn constant_has_only_dc() {
        let s = dft(&[3.0; 16]).unwrap();
        assert!((s.bins[0].re - 48.0).abs() < 1e-12);
        assert!(s.bins[1..].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn pure_tone_lands_on_two_bins() {
        let n = 120;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 4.0 * i as f64 / n as f64).cos()).collect();
        let s = dft(&x).unwrap();
        for (k, c) in s.bins.iter().enumerate() {
            if k == 4 || k == n - 4 {
                assert!((c.norm() - 60.0).abs() < 1e-9);
            } else {
                assert!(c.norm() < 1e-9, "bin {k} = {}", c.norm());
            }
        }
    }

    #[test]
    fn short_input_rejected() {
        assert!(dft(&[1.0]).is_err());
    }

    #[test]
    fn single_tone_mask() {
        let n = 120;
        let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 4.0 * i as f64 / n as f64).sin()).collect();
        assert_eq!(ideal_mask(&x, MaskMode::Energy).unwrap().bins, vec![4]);
    }

    #[test]
    fn constant_ideal_has_no_support() {
        assert!(matches!(ideal_mask(&[1.0; 30], MaskMode::Energy), Err(Error::NoSpectralSupport)));
        assert!(pos(&[1.0; 30], &[1.0; 30]).is_err());
    }

    #[test]
    fn identity_and_dc_filters() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7919) % 13) as f64).collect();
        let all = filter_sequence(&x, &BinMask::all(37)).unwrap();
        for (a, b) in all.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
        let mean = x.iter().sum::<f64>() / 37.0;
        let dc = filter_sequence(&x, &BinMask::new(37, vec![]).unwrap()).unwrap();
        assert!(dc.iter().all(|v| (v - mean).abs() < 1e-9));
    }

    #[test]
    fn pos_of_ideal_is_one() {
        let ideal = square(120, 30, 0.5);
        assert!((pos(&ideal, &ideal).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn count_mode_takes_ceiling() {
        let ideal = square(120, 30, 0.5);
        let spec = dft(&ideal).unwrap();
        let sup = support(&spec);
        let mask = ideal_mask(&ideal, MaskMode::Count).unwrap();
        assert_eq!(mask.bins.len(), (0.8 * sup.len() as f64).ceil() as usize);
    }

    #[test]
    fn filter_length_mismatch() {
        let mask = BinMask::all(10);
        assert!(matches!(filter_sequence(&[0.0; 9], &mask), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), 0.0);
    }
}
