use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),

    #[error("inconsistent dimensions in frame {frame}: expected {expected_w}x{expected_h}, found {found_w}x{found_h}")]
    InconsistentDimensions {
        frame: usize,
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("non-contiguous frame index: expected {expected}, found {found}")]
    NonContiguousIndex { expected: usize, found: String },

    #[error("unsupported PGM maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),

    #[error("malformed PGM {path}: {reason}")]
    MalformedPgm { path: PathBuf, reason: String },

    #[error("frame {frame} has {count} landmarks, expected 68")]
    LandmarkCount { frame: usize, count: usize },

    #[error("frame count mismatch: {what} has {found} frames, clip has {expected}")]
    FrameCountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty trace")]
    EmptyTrace,

    #[error("non-numeric field in {path} at row {row}: {value:?}")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("malformed CSV in {path}: {reason}")]
    MalformedCsv { path: PathBuf, reason: String },

    #[error("corrupt model in {path}: {reason}")]
    CorruptModel { path: PathBuf, reason: String },

    #[error("object inside focal length: u = {u} m, f = {f} m")]
    InsideFocalLength { u: f64, f: f64 },

    #[error("no spectral support: ideal sequence is constant")]
    NoSpectralSupport,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("classifier needs both classes, got {n_real} real and {n_fake} fake")]
    SingleClass { n_real: usize, n_fake: usize },

    #[error("majority vote needs an odd number of regions, got {0}")]
    EvenRegionCount(usize),

    #[error("clip lasts {clip_s:.3} s, shorter than one vibration period of {period_s:.3} s")]
    ClipTooShort { clip_s: f64, period_s: f64 },

    #[error("IMU trace covers {trace_s:.3} s, clip needs {clip_s:.3} s")]
    TraceTooShort { trace_s: f64, clip_s: f64 },

    #[error("requested {requested} regions but only {available} candidates exist")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("region {x},{y} {w}x{h} lies outside the {width}x{height} frame")]
    RegionOutOfBounds {
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
