//! Active vibration-probe deepfake detection.
//!
//! A phone vibrates on a known on/off schedule while recording a face.
//! Genuine footage blurs in step with the schedule; a face swapped in by a
//! generator does not. This crate measures per-frame blur in landmark
//! regions, filters the blur sequence against the probe's ideal square wave,
//! classifies the result, and ships a deterministic simulator that produces
//! probe-response corpora for testing all of it.

pub mod classify;
pub mod error;
pub mod features;
pub mod io;
pub mod optics;
pub mod pipeline;
pub mod probe;
pub mod simulate;
pub mod spectral;
pub mod stabilize;
pub mod types;

pub use classify::{Classifier, LabeledDataset, TrainConfig, Variant};
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureVector, Normalize, RegionSet};
pub use pipeline::{ClipInputs, DetectConfig, FrameSource, StabilizeConfig};
pub use spectral::MaskMode;
pub use stabilize::StabilizeMode;
pub use types::{
    Axis, DetectionReport, Fps, FrameSequence, GrayFrame, ImuTrace, LandmarkSet, Point, Region, RegionVote, VarianceSequence, Verdict,
    VibrationPattern, LANDMARK_COUNT,
};
