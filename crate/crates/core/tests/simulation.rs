use probeshake_core::io;
use probeshake_core::optics::{self, LensConfig};
use probeshake_core::pipeline::{self, ClipInputs, DetectConfig};
use probeshake_core::simulate::{
    make_scene, ClipRenderer, ClipSpec, CorpusConfig, ImuConfig, NoiseSpec, ResponseModel, ResponseVariant, SceneConfig,
};
use probeshake_core::spectral::{self, MaskMode};
use probeshake_core::stabilize::{self, ImuGeometry};
use probeshake_core::{classify, features, probe, Fps, ImuTrace, Region, TrainConfig, Variant, VibrationPattern};
use rayon::prelude::*;

fn renderer(variant: ResponseVariant, pattern: VibrationPattern, scene_seed: u64, seed: u64) -> ClipRenderer {
    let scene = make_scene(scene_seed, &SceneConfig::default()).unwrap();
    let spec = ClipSpec {
        pattern,
        response: ResponseModel {
            variant,
            params: Default::default(),
        },
        noise: NoiseSpec::clean(),
        imu: ImuConfig::default(),
        fps: Fps::default(),
    };
    ClipRenderer::new(scene, spec, seed).unwrap()
}

fn analyze(r: &ClipRenderer, pattern: &VibrationPattern) -> pipeline::ClipAnalysis {
    let inputs = ClipInputs {
        landmarks: r.landmarks(),
        imu: None,
    };
    pipeline::analyze(r, inputs, pattern, &DetectConfig::default()).unwrap()
}

fn one_second() -> VibrationPattern {
    VibrationPattern::new(1.0, 0.5, 4.0, 0.0).unwrap()
}

#[test]
fn randomized_duty_is_uniform_over_options() {
    let mut counts = [0usize; 3];
    for seed in 0..10_000u64 {
        let p = probe::randomize_pattern(seed, (1.0, 2.0), 4.0, 30.0).unwrap();
        let i = probe::DUTY_OPTIONS.iter().position(|&d| d == p.duty).unwrap();
        counts[i] += 1;
        let frames = p.period_s * 30.0;
        assert!((frames - frames.round()).abs() < 1e-9, "period {} s", p.period_s);
        assert!((30.0..=60.0).contains(&frames.round()));
    }
    for c in counts {
        assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
    }
}

#[test]
fn ideal_autocorrelation_peaks_at_period() {
    for tenths in (10..=50).step_by(5) {
        let period = tenths as f64 / 10.0;
        let duration = f64::max(4.0, 3.0 * period);
        let n = (duration * 30.0).round() as usize;
        let pattern = VibrationPattern::new(period, 0.5, duration, 0.0).unwrap();
        let ideal = probe::ideal_variance_sequence(&pattern, 30.0, n).values;
        let ac = probe::autocorrelation(&ideal);
        let want = (period * 30.0).round() as usize;
        let first_negative = ac.iter().position(|&a| a < 0.0).unwrap();
        let peak = (first_negative..n - n / 4).max_by(|&a, &b| ac[a].total_cmp(&ac[b])).unwrap();
        assert_eq!(peak, want, "period {period}");
        assert_eq!(probe::estimate_period_frames(&ideal), Some(want));
    }
}

#[test]
fn real_clip_dims_in_every_on_cycle() {
    let pattern = one_second();
    let r = renderer(ResponseVariant::Real, pattern, 5, 6);
    let a = analyze(&r, &pattern);
    let states = probe::schedule(&pattern, 30.0, 120).states;
    for seq in &a.sequences {
        for cycle in 0..4 {
            let (mut on, mut off) = (vec![], vec![]);
            for k in cycle * 30..(cycle + 1) * 30 {
                if states[k] { on.push(seq.values[k]) } else { off.push(seq.values[k]) }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!(mean(&on) < mean(&off), "cycle {cycle}");
        }
    }
}

#[test]
fn correlation_with_ideal_separates_real_from_random_fakes() {
    let pattern = one_second();
    let ideal = probe::ideal_variance_sequence(&pattern, 30.0, 120).values;
    let (_, mask) = features::probe_reference(&pattern, 30.0, 120, MaskMode::Energy).unwrap();
    for i in 0..8u64 {
        let real = analyze(&renderer(ResponseVariant::Real, pattern, 70 + i, 170 + i), &pattern);
        let fake = analyze(&renderer(ResponseVariant::FakeRandom, pattern, 70 + i, 170 + i), &pattern);
        for (r, f) in real.sequences.iter().zip(&fake.sequences) {
            let (rc, fc) = (spectral::pearson(&r.values, &ideal), spectral::pearson(&f.values, &ideal));
            assert!(rc > 0.5, "clip {i}: real correlation {rc}");
            assert!(fc < 0.3, "clip {i}: random-fake correlation {fc}");
            let rf = spectral::pearson(&spectral::filter_sequence(&r.values, &mask).unwrap(), &ideal);
            let ff = spectral::pearson(&spectral::filter_sequence(&f.values, &mask).unwrap(), &ideal);
            assert!(rf >= 0.8, "clip {i}: filtered real correlation {rf}");
            assert!(ff < 0.5, "clip {i}: filtered fake correlation {ff}");
        }
        for variant in [ResponseVariant::FakeStatic, ResponseVariant::FakeAdaptive] {
            let other = analyze(&renderer(variant, pattern, 70 + i, 170 + i), &pattern);
            let best = |a: &pipeline::ClipAnalysis| {
                a.vectors.iter().map(|v| spectral::pearson(&v.values, &ideal)).fold(f64::MIN, f64::max)
            };
            assert!(best(&other) < best(&real), "clip {i}: {variant:?}");
        }
    }
}

#[test]
fn streamed_and_stored_clips_give_identical_features() {
    let pattern = VibrationPattern::new(1.3, 0.2, 4.0, 0.0).unwrap();
    let r = renderer(ResponseVariant::FakeAdaptive, pattern, 8, 9);
    let streamed = analyze(&r, &pattern);
    let dir = tempfile::tempdir().unwrap();
    let clip = r.render().unwrap();
    io::save_frame_sequence(&clip.frames, dir.path()).unwrap();
    let loaded = io::load_frame_sequence(dir.path()).unwrap();
    let inputs = ClipInputs {
        landmarks: &clip.landmarks,
        imu: None,
    };
    let stored = pipeline::analyze(&loaded, inputs, &pattern, &DetectConfig::default()).unwrap();
    assert_eq!(streamed.vectors, stored.vectors);
    assert_eq!(streamed.pos, stored.pos);
    assert_eq!(streamed.vectors.len(), 3);
    assert!(streamed.vectors.iter().all(|v| v.values.len() == 120));
}

#[test]
fn corpus_plans_are_reproducible() {
    let cfg = CorpusConfig {
        master_seed: 17,
        n_real: 5,
        n_fake: 6,
        ..Default::default()
    };
    assert_eq!(cfg.plan().unwrap(), cfg.plan().unwrap());
    let other = CorpusConfig { master_seed: 18, ..cfg.clone() };
    assert_ne!(cfg.plan().unwrap(), other.plan().unwrap());
    let a = cfg.renderer(&cfg.plan_clip(7).unwrap()).unwrap().render_frame(40).unwrap();
    let b = cfg.renderer(&cfg.plan_clip(7).unwrap()).unwrap().render_frame(40).unwrap();
    assert_eq!(a, b);
}

#[test]
fn imu_offsets_follow_constant_acceleration() {
    let (rate, a, fps) = (400.0, 0.02, 30.0);
    let samples = vec![[a, -a / 2.0, 0.0]; 1700];
    let trace = ImuTrace::new(samples, rate).unwrap();
    let lens = LensConfig::reference_phone();
    let geometry = ImuGeometry {
        object_distance_m: 0.2,
        focal_length_px: lens.focal_length_px(),
    };
    let base = vec![Region::new(100, 100, 50, 50)];
    let track = stabilize::imu_stabilize(base, &trace, fps, 120, geometry, (512, 512)).unwrap();
    let dt = 1.0 / rate;
    for k in 0..120 {
        let n = (k as f64 / fps * rate).round();
        let d = a * dt * dt * n * (n - 1.0) / 2.0;
        let px = optics::pixel_shift(d, 0.2, geometry.focal_length_px).unwrap();
        let py = optics::pixel_shift(-d / 2.0, 0.2, geometry.focal_length_px).unwrap();
        let r = track.region_at(0, k);
        assert_eq!(r.x as i64 - 100, ((-px).round() as i64).clamp(-100, 362), "frame {k}");
        assert_eq!(r.y as i64 - 100, ((-py).round() as i64).clamp(-100, 362), "frame {k}");
    }
}

#[test]
fn identical_classes_are_not_separable() {
    let cfg = DetectConfig::default();
    let corpus = |seed| CorpusConfig {
        master_seed: seed,
        n_real: 120,
        n_fake: 120,
        fake_mix: vec![ResponseVariant::Real],
        ..Default::default()
    };
    let (train, test) = rayon::join(
        || pipeline::corpus_clips(&corpus(41), &cfg).unwrap(),
        || pipeline::corpus_clips(&corpus(42), &cfg).unwrap(),
    );
    let model = classify::train(&pipeline::to_dataset(&train), Variant::Nn2, &TrainConfig::default()).unwrap();
    let auc = model.evaluate(&pipeline::to_dataset(&test)).unwrap().auc;
    assert!((0.4..=0.6).contains(&auc), "auc {auc}");
}

#[test]
fn training_ignores_sample_order() {
    let cfg = CorpusConfig {
        master_seed: 43,
        n_real: 20,
        n_fake: 20,
        ..Default::default()
    };
    let clips = pipeline::corpus_clips(&cfg, &DetectConfig::default()).unwrap();
    let mut reversed = clips.clone();
    reversed.reverse();
    reversed.par_iter_mut().for_each(|c| c.vectors.reverse());
    let tc = TrainConfig::default();
    let a = classify::train(&pipeline::to_dataset(&clips), Variant::Nn2, &tc).unwrap();
    let b = classify::train(&pipeline::to_dataset(&reversed), Variant::Nn2, &tc).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
