//! Gram-matrix throughput: the `par` backend (rayon unless built with
//! `--no-default-features`) against a plain sequential loop over the same
//! engine calls.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dqk::data::{gen_checkerboard, CheckerboardSpec};
use dqk::learn::loss_and_grad;
use dqk::qkernel::{FeatureMapSpec, KernelEngine, NoiseMode, NoiseModel, ParameterVector};
use nalgebra::DMatrix;

fn sequential_gram(engine: &KernelEngine, theta: &ParameterVector, xs: &[Vec<f64>]) -> DMatrix<f64> {
    let emb: Vec<_> = xs.iter().map(|x| engine.embed(theta, x).unwrap()).collect();
    let n = emb.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = engine.pair(&emb[i].state, &emb[j].observable);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

fn gram(c: &mut Criterion) {
    let data = gen_checkerboard(&CheckerboardSpec { points_per_cell: 2, ..Default::default() }).unwrap();
    let xs: Vec<Vec<f64>> = data.points().iter().map(|p| p.x.clone()).collect();
    let backend = if dqk::par::is_parallel() { "rayon" } else { "sequential-feature" };
    let mut group = c.benchmark_group("gram");
    group.sample_size(10);
    for n_qubits in [3, 5] {
        let spec = FeatureMapSpec::alternating(n_qubits, 4).unwrap();
        let theta = ParameterVector(vec![0.05; spec.n_params()]);
        let engine = KernelEngine::new(&spec, NoiseMode::PerGate(0.0005)).unwrap();
        assert_eq!(engine.gram(&theta, &xs).unwrap(), sequential_gram(&engine, &theta, &xs));
        group.bench_with_input(BenchmarkId::new(backend, n_qubits), &n_qubits, |b, _| {
            b.iter(|| engine.gram(black_box(&theta), &xs).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("loop", n_qubits), &n_qubits, |b, _| {
            b.iter(|| sequential_gram(&engine, black_box(&theta), &xs))
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let data = gen_checkerboard(&CheckerboardSpec { points_per_cell: 1, ..Default::default() }).unwrap();
    let batch = data.select(&[0, 1, 2, 3, 4, 5, 6, 7]);
    let spec = FeatureMapSpec::alternating(5, 8).unwrap();
    let theta = ParameterVector(vec![0.05; spec.n_params()]);
    let noise = NoiseModel::per_gate(0.0005);
    c.bench_function("alignment_gradient/8pts_5q_8l", |b| {
        b.iter(|| loss_and_grad(&batch, black_box(&theta), &spec, &noise).unwrap())
    });
}

criterion_group!(benches, gram, gradient);
criterion_main!(benches);
