//! On-disk formats: frame directories (manifest + binary PGM), landmark
//! JSON, IMU CSV, patterns, models and detection reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::classify::Classifier;
use crate::error::{Error, Result};
use crate::types::{DetectionReport, Fps, FrameSequence, GrayFrame, ImuTrace, LandmarkSet, VibrationPattern};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LANDMARKS_FILE: &str = "landmarks.json";
pub const IMU_FILE: &str = "imu.csv";
pub const PATTERN_FILE: &str = "pattern.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub fps_num: u32,
    pub fps_den: u32,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub bit_depth: u8,
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.pgm")
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("path", format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayFrame> {
    let malformed = |reason: &str| Error::MalformedPgm {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token(bytes).as_deref() != Some("P5") {
        return Err(malformed("magic is not P5"));
    }
    let mut number = |what: &str| -> Result<usize> {
        token(bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| malformed(&format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data_start = pos + 1;
    let expected = width * height;
    if bytes.len() < data_start || bytes.len() - data_start != expected {
        return Err(malformed(&format!(
            "raster holds {} bytes, expected {expected}",
            bytes.len().saturating_sub(data_start)
        )));
    }
    GrayFrame::new(width, height, bytes[data_start..].to_vec())
}

pub fn save_frame_sequence(clip: &FrameSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in clip.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        fs::write(&path, encode_pgm(frame)).map_err(|e| Error::io(&path, e))?;
    }
    let manifest = FrameManifest {
        fps_num: clip.fps().num,
        fps_den: clip.fps().den,
        width: clip.width(),
        height: clip.height(),
        frame_count: clip.len(),
        bit_depth: 8,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_frame_sequence(dir: &Path) -> Result<FrameSequence> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(Error::MissingManifest(manifest_path));
    }
    let manifest: FrameManifest = read_json(&manifest_path)?;
    if manifest.bit_depth != 8 {
        return Err(Error::invalid("manifest", format!("bit_depth {} is not 8", manifest.bit_depth)));
    }
    let fps = Fps::new(manifest.fps_num, manifest.fps_den)?;

    let mut indices = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(idx) = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".pgm"))
        {
            let parsed = idx
                .parse::<usize>()
                .ok()
                .filter(|_| idx.len() == 6)
                .ok_or_else(|| Error::NonContiguousIndex {
                    expected: indices.len(),
                    found: name.clone(),
                })?;
            indices.push(parsed);
        }
    }
    indices.sort_unstable();
    for (expected, &found) in indices.iter().enumerate() {
        if expected != found {
            return Err(Error::NonContiguousIndex {
                expected,
                found: frame_file_name(found),
            });
        }
    }
    if indices.len() != manifest.frame_count {
        return Err(Error::NonContiguousIndex {
            expected: indices.len(),
            found: format!("end of directory (manifest lists {} frames)", manifest.frame_count),
        });
    }

    let mut frames = Vec::with_capacity(indices.len());
    for i in 0..indices.len() {
        let path = dir.join(frame_file_name(i));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let frame = decode_pgm(&bytes, &path)?;
        if frame.width() != manifest.width || frame.height() != manifest.height {
            return Err(Error::InconsistentDimensions {
                frame: i,
                expected_w: manifest.width,
                expected_h: manifest.height,
                found_w: frame.width(),
                found_h: frame.height(),
            });
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, fps)
}

pub fn save_landmarks(landmarks: &LandmarkSet, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec(landmarks).map_err(|e| Error::json(path, e))?;
    write_atomic(path, &bytes)
}

/// Loads landmarks; when `bounds` is given, coordinates are clamped into the
/// frame.
pub fn load_landmarks(path: &Path, bounds: Option<(usize, usize)>) -> Result<LandmarkSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // Parse loosely first so a wrong point count is reported with its frame.
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))?;
    let frames = rows
        .into_iter()
        .map(|r| r.into_iter().map(|[x, y]| crate::types::Point::new(x, y)).collect())
        .collect();
    let set = LandmarkSet::from_points(frames)?;
    Ok(match bounds {
        Some((w, h)) => set.clamped(w, h),
        None => set,
    })
}

/// Loads landmarks and checks they align with `clip`.
pub fn load_landmarks_for(path: &Path, clip: &FrameSequence) -> Result<LandmarkSet> {
    let set = load_landmarks(path, Some((clip.width(), clip.height())))?;
    set.check_frame_count(clip.len())?;
    Ok(set)
}

#[derive(Debug, Serialize, Deserialize)]
struct ImuRow {
    t: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

pub fn save_imu(trace: &ImuTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, s) in trace.samples().iter().enumerate() {
        w.serialize(ImuRow {
            t: i as f64 / trace.sample_rate_hz(),
            ax: s[0],
            ay: s[1],
            az: s[2],
        })
        .map_err(|e| Error::MalformedCsv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

pub fn load_imu(path: &Path) -> Result<ImuTrace> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedCsv {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedCsv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .clone();
    if headers.iter().map(str::trim).ne(["t", "ax", "ay", "az"]) {
        return Err(Error::MalformedCsv {
            path: path.to_path_buf(),
            reason: format!("header must be t,ax,ay,az, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedCsv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if record.len() != 4 {
            return Err(Error::MalformedCsv {
                path: path.to_path_buf(),
                reason: format!("row {} has {} fields", row + 1, record.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (slot, field) in vals.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: row + 1,
                value: field.to_string(),
            })?;
        }
        times.push(vals[0]);
        samples.push([vals[1], vals[2], vals[3]]);
    }
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let rate = infer_rate(&times).map_err(|reason| Error::MalformedCsv {
        path: path.to_path_buf(),
        reason,
    })?;
    ImuTrace::new(samples, rate)
}

/// Uniform sample rate from timestamps, snapped to a micro-hertz grid so a
/// saved trace reloads with the identical rate.
fn infer_rate(times: &[f64]) -> std::result::Result<f64, String> {
    if times.len() < 2 {
        return Err("need at least two samples to infer the sample rate".into());
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err("timestamps must increase".into());
    }
    let step = span / (times.len() - 1) as f64;
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > 1e-6 * step.max(1e-9) + 1e-9 {
            return Err(format!("non-uniform sampling at row {}", i + 2));
        }
    }
    Ok(((1.0 / step) * 1e6).round() / 1e6)
}

pub fn save_pattern(pattern: &VibrationPattern, path: &Path) -> Result<()> {
    write_json(path, pattern)
}

pub fn load_pattern(path: &Path) -> Result<VibrationPattern> {
    let p: VibrationPattern = read_json(path)?;
    p.validate()?;
    Ok(p)
}

pub fn save_report(report: &DetectionReport, path: &Path) -> Result<()> {
    write_json(path, report)
}

pub fn load_report(path: &Path) -> Result<DetectionReport> {
    read_json(path)
}

pub fn save_model(model: &Classifier, path: &Path) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<Classifier> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: String| Error::CorruptModel {
        path: path.to_path_buf(),
        reason,
    };
    let model: Classifier = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    model.check().map_err(|e| corrupt(e.to_string()))?;
    Ok(model)
}

/// Conventional file locations inside a clip directory.
#[derive(Debug, Clone)]
pub struct ClipPaths {
    pub dir: PathBuf,
}

impl ClipPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn landmarks(&self) -> PathBuf {
        self.dir.join(LANDMARKS_FILE)
    }

    pub fn imu(&self) -> PathBuf {
        self.dir.join(IMU_FILE)
    }

    pub fn pattern(&self) -> PathBuf {
        self.dir.join(PATTERN_FILE)
    }
}
