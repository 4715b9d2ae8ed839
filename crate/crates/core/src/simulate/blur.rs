use crate::types::{GrayFrame, Region};

/// Row-major floating-point image.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_frame(frame: &GrayFrame) -> Self {
        Self {
            width: frame.width(),
            height: frame.height(),
            data: frame.data().iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at `(x, y)` with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Rounds and saturates into 8-bit gray levels.
    pub fn to_frame(&self) -> GrayFrame {
        GrayFrame::from_fn(self.width, self.height, |x, y| quantize(self.get(x, y)))
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Normalized Gaussian taps, radius `⌈3σ⌉`; `[1.0]` for `σ ≤ 0`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur of an image given as a sampling function,
/// evaluated only inside `window`. Reads outside the `width × height`
/// frame clamp to the border, so any window equals the same crop of a
/// full-frame blur.
pub fn blur_window(source: impl Fn(usize, usize) -> f64, width: usize, height: usize, window: Region, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let r = kernel.len() / 2;
    let (w, h) = (window.w, window.h);
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let clamp = |v: i64, len: usize| v.clamp(0, len as i64 - 1) as usize;
    let cols: Vec<usize> = (0..pw).map(|i| clamp(window.x as i64 + i as i64 - r as i64, width)).collect();

    let mut patch = Vec::with_capacity(pw * ph);
    for j in 0..ph {
        let y = clamp(window.y as i64 + j as i64 - r as i64, height);
        patch.extend(cols.iter().map(|&x| source(x, y)));
    }
    if r == 0 {
        return patch;
    }

    let mut tmp = vec![0.0; ph * w];
    for j in 0..ph {
        let row = &patch[j * pw..(j + 1) * pw];
        for (i, out) in tmp[j * w..(j + 1) * w].iter_mut().enumerate() {
            *out = kernel.iter().zip(&row[i..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for (t, k) in kernel.iter().enumerate() {
        for j in 0..h {
            let src = &tmp[(j + t) * w..(j + t + 1) * w];
            for (o, v) in out[j * w..(j + 1) * w].iter_mut().zip(src) {
                *o += k * v;
            }
        }
    }
    out
}

pub fn gaussian_blur_plane(plane: &Plane, sigma: f64) -> Plane {
    let window = Region::new(0, 0, plane.width, plane.height);
    Plane {
        width: plane.width,
        height: plane.height,
        data: blur_window(|x, y| plane.get(x, y), plane.width, plane.height, window, sigma),
    }
}

/// Gaussian blur of an 8-bit frame; `σ = 0` returns the frame unchanged.
pub fn gaussian_blur(frame: &GrayFrame, sigma: f64) -> GrayFrame {
    if !(sigma > 0.0) {
        return frame.clone();
    }
    gaussian_blur_plane(&Plane::from_frame(frame), sigma).to_frame()
}
