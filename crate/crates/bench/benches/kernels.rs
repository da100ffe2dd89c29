use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;

use mmsched_core::ddpg::{train, TrainConfig};
use mmsched_core::env::{Controlled, SimEnv};
use mmsched_core::forecast::reconcile;
use mmsched_core::nn::LstmParams;
use mmsched_core::scenario::ScenarioFile;
use mmsched_core::Rng64;

fn lstm(c: &mut Criterion) {
    let mut rng = Rng64::new(1);
    let p = LstmParams::new(24, 32, &mut rng);
    let xs: Vec<Array2<f64>> = (0..8)
        .map(|_| Array2::from_shape_simple_fn((64, 24), || rng.uniform(-1.0, 1.0)))
        .collect();
    c.bench_function("lstm_forward_64x8", |b| b.iter(|| p.forward(black_box(&xs)).unwrap()));
    let (hs, tape) = p.forward(&xs).unwrap();
    c.bench_function("lstm_backward_64x8", |b| b.iter(|| p.backward(black_box(&tape), &hs).unwrap()));
}

fn reconciliation(c: &mut Criterion) {
    let mut rng = Rng64::new(2);
    let base: Vec<f64> = (0..41).map(|_| rng.uniform(0.0, 50.0)).collect();
    c.bench_function("reconcile_40_stops", |b| b.iter(|| reconcile(black_box(&base)).unwrap()));
}

fn bike_step(c: &mut Criterion) {
    let s = ScenarioFile::bundled("tidal5").unwrap().unwrap();
    let mut world = s.build_world().unwrap();
    let trips: Vec<_> = (0..5)
        .flat_map(|o| (0..5).filter(move |&d| d != o).map(move |d| mmsched_core::demand::Trip { origin: o, destination: d, count: 1 }))
        .collect();
    c.bench_function("step_bike_world_tidal5", |b| {
        b.iter(|| {
            if world.clock.is_finished() {
                world = s.build_world().unwrap();
            }
            world.step_bike_world(black_box(&trips)).unwrap()
        })
    });
}

fn ddpg_episode(c: &mut Criterion) {
    let s = ScenarioFile::bundled("tidal5").unwrap().unwrap();
    let cfg = TrainConfig {
        episodes: 2,
        batch_size: 16,
        actor_hidden: 16,
        critic_hidden: 32,
        window: 4,
        ..Default::default()
    };
    let mut group = c.benchmark_group("ddpg");
    group.sample_size(10);
    group.bench_function("train_2_episodes_tidal5", |b| {
        b.iter(|| {
            let mut env = SimEnv::new(&s, Controlled::Bike).unwrap();
            train(&mut env, &cfg, None).unwrap().curve.len()
        })
    });
    group.finish();
}

criterion_group!(benches, lstm, reconciliation, bike_step, ddpg_episode);
criterion_main!(benches);
