use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use srlift_bench::{input_batch, small_dataset, sr_multiply};
use srlift_core::layers::Mode;
use srlift_core::models::{build_model, ModelConfig, ModelKind};
use srlift_core::protocols::{occurrences, pa_mpjpe};
use srlift_core::training::{l1_loss, train_step, AmsGrad, OptimizerState};
use srlift_core::Tape;

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("predict_b64");
    for (name, kind) in [
        ("fc", ModelKind::Fc),
        ("gp", ModelKind::Gp),
        ("sr_mult1", sr_multiply()),
    ] {
        let model = build_model(&ModelConfig::new(kind), 1).unwrap();
        let x = input_batch(64, 34);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model.predict(black_box(&x)).unwrap())
        });
    }
    g.finish();
}

fn train_steps(c: &mut Criterion) {
    let mut g = c.benchmark_group("train_step_w256_b256");
    for (name, kind) in [("fc", ModelKind::Fc), ("sr_mult1", sr_multiply())] {
        let cfg = ModelConfig {
            width: 256,
            ..ModelConfig::new(kind)
        };
        let mut model = build_model(&cfg, 1).unwrap();
        let mut state = OptimizerState::new(&model.params);
        let (x, y) = (input_batch(256, 34), input_batch(256, 51));
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                train_step(
                    &mut model,
                    &mut state,
                    &AmsGrad::default(),
                    x.clone(),
                    y.clone(),
                    1e-4,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn backward_only(c: &mut Criterion) {
    let model = build_model(
        &ModelConfig {
            width: 256,
            ..ModelConfig::new(ModelKind::Fc)
        },
        1,
    )
    .unwrap();
    let (x, y) = (input_batch(256, 34), input_batch(256, 51));
    c.bench_function("forward_backward_fc_w256", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let mut ctx = model.ctx(&mut tape, Mode::Train, true);
            let xv = ctx.tape.constant(x.clone());
            let out = model.forward(&mut ctx, xv).unwrap();
            drop(ctx);
            let t = tape.constant(y.clone());
            let loss = l1_loss(&mut tape, out, t).unwrap();
            tape.backward(loss).unwrap()
        })
    });
}

fn rare_and_metrics(c: &mut Criterion) {
    let ds = small_dataset(400);
    let poses: Vec<&[[f64; 3]]> = ds.samples().map(|s| s.pose_3d.as_slice()).collect();
    let sigma = vec![100.0; 17];
    c.bench_function("occurrences_400", |b| {
        b.iter(|| occurrences(black_box(&poses), &sigma).unwrap())
    });
    let (p, q) = (poses[0], poses[200]);
    c.bench_function("pa_mpjpe", |b| {
        b.iter(|| pa_mpjpe(black_box(p), black_box(q), true).unwrap())
    });
}

criterion_group!(
    benches,
    forward,
    train_steps,
    backward_only,
    rare_and_metrics
);
criterion_main!(benches);
