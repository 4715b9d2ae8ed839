use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use probeshake_core::io::{self, ClipPaths};
use probeshake_core::pipeline::{self, DetectConfig};
use probeshake_core::simulate::{
    self, make_scene, ClipSpec, CorpusConfig, ImuConfig, NoiseSpec, ResponseModel, ResponseParams, ResponseVariant, SceneConfig,
};
use probeshake_core::{classify, Fps, TrainConfig, Variant, Verdict, VibrationPattern};
use tempfile::TempDir;

fn probeshake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probeshake"))
        .args(args)
        .output()
        .expect("spawn probeshake")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small simulated corpus on disk and a model trained in-process on a
/// larger, disjoint one.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn get() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let dir = tempfile::tempdir().unwrap();
            let train = CorpusConfig {
                master_seed: 31,
                n_real: 300,
                n_fake: 300,
                ..Default::default()
            };
            let clips = pipeline::corpus_clips(&train, &DetectConfig::default()).unwrap();
            let model = classify::train(&pipeline::to_dataset(&clips), Variant::Nn2, &TrainConfig::default()).unwrap();
            io::save_model(&model, &dir.path().join("model.json")).unwrap();

            let corpus = dir.path().join("corpus");
            let out = probeshake(&["simulate", "--out", s(&corpus), "--seed", "32", "--n-real", "2", "--n-fake", "2"]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            Fixture { dir }
        })
    }

    fn model(&self) -> PathBuf {
        self.dir.path().join("model.json")
    }

    fn corpus(&self) -> PathBuf {
        self.dir.path().join("corpus")
    }
}

/// Clean REAL clip whose ON frames all share one blur width, so its
/// variance sequence is a two-level square wave in step with the probe.
fn write_matching_clip(dir: &Path, pattern: VibrationPattern) {
    let scene = make_scene(41, &SceneConfig::default()).unwrap();
    let spec = ClipSpec {
        pattern,
        response: ResponseModel {
            variant: ResponseVariant::Real,
            params: ResponseParams {
                sigma_on: (0.7, 0.7),
                ..Default::default()
            },
        },
        noise: NoiseSpec::clean(),
        imu: ImuConfig::default(),
        fps: Fps::default(),
    };
    let clip = simulate::render_clip(&scene, &spec, 42).unwrap();
    io::save_frame_sequence(&clip.frames, dir).unwrap();
    let paths = ClipPaths::new(dir);
    io::save_landmarks(&clip.landmarks, &paths.landmarks()).unwrap();
    io::save_pattern(&pattern, &paths.pattern()).unwrap();
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = probeshake(&["detect", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(probeshake(&["--help"]).status.code(), Some(0));
    assert_eq!(probeshake(&["--version"]).status.code(), Some(0));
    let help = probeshake(&["detect", "--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--stabilize", "--regions", "--region-size", "--mask-mode", "--model"] {
        assert!(text.contains(flag), "detect --help lacks {flag}");
    }
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing");
    let out = probeshake(&["pos", "--clip", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn detect_verdicts_follow_labels() {
    let f = Fixture::get();
    let labels = simulate::load_labels(&f.corpus()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for label in &labels {
        let report = tmp.path().join(format!("{}.json", label.clip_id));
        let clip = f.corpus().join(&label.clip_id);
        let out = probeshake(&["detect", "--clip", s(&clip), "--model", s(&f.model()), "--out", s(&report)]);
        let expected = match label.label {
            Verdict::Real => 0,
            Verdict::Fake => 3,
        };
        assert_eq!(out.status.code(), Some(expected), "{}", label.clip_id);
        let r = io::load_report(&report).unwrap();
        assert_eq!(r.verdict, label.label);
        assert!(r.timestamp_unix_s.is_none());
    }
}

#[test]
fn detect_rejects_clip_shorter_than_period() {
    let f = Fixture::get();
    let tmp = tempfile::tempdir().unwrap();
    let pattern_path = tmp.path().join("long.json");
    io::save_pattern(&VibrationPattern::new(6.0, 0.5, 6.0, 0.0).unwrap(), &pattern_path).unwrap();
    let clip = f.corpus().join("clip_0000");
    let out = probeshake(&[
        "detect",
        "--clip",
        s(&clip),
        "--pattern",
        s(&pattern_path),
        "--model",
        s(&f.model()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shorter than one vibration period"));
}

#[test]
fn pos_of_matching_clip_is_high() {
    let tmp = tempfile::tempdir().unwrap();
    write_matching_clip(tmp.path(), VibrationPattern::new(1.0, 0.5, 4.0, 0.0).unwrap());
    let out = probeshake(&["pos", "--clip", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let pos: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(pos >= 0.8, "pos {pos}");
}

#[test]
fn evaluate_writes_json_and_csv() {
    let f = Fixture::get();
    let tmp = tempfile::tempdir().unwrap();
    let (json, csv) = (tmp.path().join("eval.json"), tmp.path().join("eval.csv"));
    let out = probeshake(&[
        "evaluate",
        "--corpus",
        s(&f.corpus()),
        "--model",
        s(&f.model()),
        "--out",
        s(&json),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let eval: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(eval["n_real"], 2);
    assert_eq!(eval["n_fake"], 2);
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("clip_id,label,verdict,score,pos"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn extract_is_reproducible() {
    let f = Fixture::get();
    let tmp = tempfile::tempdir().unwrap();
    let clip = f.corpus().join("clip_0001");
    let (a, b) = (tmp.path().join("a.json"), tmp.path().join("b.json"));
    for out in [&a, &b] {
        let r = probeshake(&["extract", "--clip", s(&clip), "--stabilize", "centroid", "--out", s(out)]);
        assert_eq!(r.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
