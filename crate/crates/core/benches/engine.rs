use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pvm_core::analysis::entropy_maps;
use pvm_core::vision_io::synth_video;
use pvm_core::{local_entropy_map, EntropyConfig, FoveaMode, Frame, LearningConfig, ModelConfig, ModelState, Scenario};

fn warm_model(fovea: FoveaMode) -> (ModelState, Vec<Frame>) {
    let cfg = ModelConfig::default().with_fovea(fovea);
    let mut model = ModelState::new(&cfg, LearningConfig::default()).unwrap();
    let seq = synth_video(&Scenario::TwoFrameAlternator { width: 32, height: 32, n_frames: 2 }, 0).unwrap();
    for f in &seq.frames {
        model.step(f).unwrap();
    }
    (model, seq.frames)
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    group.sample_size(20);
    for (name, fovea) in [("base", FoveaMode::None), ("foveated", FoveaMode::Central(8)), ("uhr", FoveaMode::Full)] {
        let (model, frames) = warm_model(fovea);
        group.bench_function(BenchmarkId::new("parallel", name), |b| {
            let mut m = model.clone();
            let mut t = 0;
            b.iter(|| {
                t += 1;
                black_box(m.step(&frames[t % 2]).unwrap())
            })
        });
        group.bench_function(BenchmarkId::new("sequential", name), |b| {
            let mut m = model.clone();
            let mut t = 0;
            b.iter(|| {
                t += 1;
                black_box(m.step_sequential(&frames[t % 2]).unwrap())
            })
        });
    }
    group.finish();
}

fn entropy(c: &mut Criterion) {
    let seq = synth_video(&Scenario::desk_moving_texture(16), 0).unwrap();
    let cfg = EntropyConfig::default();
    let mut group = c.benchmark_group("entropy_16_frames");
    group.sample_size(20);
    group.bench_function("parallel", |b| b.iter(|| black_box(entropy_maps(&seq.frames, &cfg))));
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(seq.frames.iter().map(|f| local_entropy_map(f, &cfg)).collect::<Vec<_>>()))
    });
    group.finish();
}

criterion_group!(benches, step, entropy);
criterion_main!(benches);
