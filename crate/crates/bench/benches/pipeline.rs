use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use probeshake_core::classify::Provenance;
use probeshake_core::pipeline::{self, ClipInputs, DetectConfig};
use probeshake_core::simulate::{self, make_scene, ClipRenderer, ClipSpec, ImuConfig, NoiseSpec, ResponseModel, ResponseVariant, SceneConfig};
use probeshake_core::spectral::{self, MaskMode};
use probeshake_core::{classify, features, probe, Fps, GrayFrame, LabeledDataset, TrainConfig, Variant, Verdict, VibrationPattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise_frame(w: usize, h: usize, seed: u64) -> GrayFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayFrame::from_fn(w, h, |_, _| rng.random())
}

fn renderer(pattern: VibrationPattern) -> ClipRenderer {
    let scene = make_scene(1, &SceneConfig::default()).unwrap();
    let spec = ClipSpec {
        pattern,
        response: ResponseModel {
            variant: ResponseVariant::Real,
            params: Default::default(),
        },
        noise: NoiseSpec::default(),
        imu: ImuConfig::default(),
        fps: Fps::default(),
    };
    ClipRenderer::new(scene, spec, 2).unwrap()
}

fn image_ops(c: &mut Criterion) {
    let frame = noise_frame(256, 256, 3);
    c.bench_function("gradient_map 256x256", |b| b.iter(|| features::gradient_map(black_box(&frame), true).unwrap()));
    c.bench_function("gaussian_blur 256x256 sigma 1", |b| b.iter(|| simulate::gaussian_blur(black_box(&frame), 1.0)));
    let r = renderer(VibrationPattern::new(1.0, 0.5, 4.0, 0.0).unwrap());
    c.bench_function("render_frame 256x256", |b| b.iter(|| r.render_frame(black_box(7)).unwrap()));
}

fn spectral_ops(c: &mut Criterion) {
    let pattern = VibrationPattern::new(1.0, 0.5, 4.0, 0.0).unwrap();
    let ideal = probe::ideal_variance_sequence(&pattern, 30.0, 120).values;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let actual: Vec<f64> = (0..120).map(|_| rng.random()).collect();
    let mask = spectral::ideal_mask(&ideal, MaskMode::Energy).unwrap();
    c.bench_function("dft n=120", |b| b.iter(|| spectral::dft(black_box(&actual)).unwrap()));
    c.bench_function("filter_sequence n=120", |b| b.iter(|| spectral::filter_sequence(black_box(&actual), &mask).unwrap()));
    c.bench_function("pos n=120", |b| b.iter(|| spectral::pos(black_box(&actual), &ideal).unwrap()));
}

fn clip_analysis(c: &mut Criterion) {
    let pattern = VibrationPattern::new(1.0, 0.5, 4.0, 0.0).unwrap();
    let r = renderer(pattern);
    let cfg = DetectConfig::default();
    let mut group = c.benchmark_group("clip");
    group.sample_size(10);
    group.bench_function("analyze 120 frames", |b| {
        b.iter(|| {
            let inputs = ClipInputs {
                landmarks: r.landmarks(),
                imu: None,
            };
            pipeline::analyze(&r, inputs, &pattern, &cfg).unwrap()
        })
    });
    group.finish();
}

fn training(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ds = LabeledDataset::new();
    for i in 0..600 {
        let label = if i % 2 == 0 { Verdict::Real } else { Verdict::Fake };
        let v: Vec<f64> = (0..120).map(|_| rng.random::<f64>() - 0.5).collect();
        ds.push(v, label, Provenance { clip: format!("c{i}"), region: 0 });
    }
    let tc = TrainConfig::default();
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("nn2 600x120, 40 epochs", |b| {
        b.iter(|| classify::train(black_box(&ds), Variant::Nn2, &tc).unwrap())
    });
    group.finish();
}

criterion_group!(benches, image_ops, spectral_ops, clip_analysis, training);
criterion_main!(benches);
