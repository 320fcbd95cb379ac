use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

use snsrom::compression::{run_training, st_hosvd};
use snsrom::fom::{burgers_model, ParameterPoint};
use snsrom::integrators::{IntegrationOptions, Scheme, SchemeId};
use snsrom::linalg::{gram, left_singular};
use snsrom::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn snapshots(rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| ((i as f64 * 0.37 + 1.0) * (j as f64 * 0.11 + 0.5)).sin())
}

fn gram_kernel(c: &mut Criterion) {
    let a = snapshots(200, 8000);
    let mut g = c.benchmark_group("gram_200x8000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| gram(&a, exec)));
    }
    g.finish();
}

fn pod_kernel(c: &mut Criterion) {
    let a = snapshots(400, 600);
    let mut g = c.benchmark_group("left_singular_400x600");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| left_singular(&a, exec)));
    }
    g.finish();
}

fn training_kernel(c: &mut Criterion) {
    let model = burgers_model(200).unwrap();
    let scheme = SchemeId::over(Scheme::BackwardEuler, 0.5, 100);
    let points: Vec<ParameterPoint> =
        (0..4).map(|k| ParameterPoint::new(vec![1.2 + 0.1 * k as f64, 0.02 + 0.002 * k as f64])).collect();
    let options = IntegrationOptions::default();
    let mut g = c.benchmark_group("burgers_training_4x200");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_training(&model, &scheme, &points, &options, exec).unwrap())
        });
    }
    g.finish();
}

fn hosvd_kernel(c: &mut Criterion) {
    let slices: Vec<DMatrix<f64>> = (0..4).map(|k| snapshots(300, 100).map(|v| v * (1.0 + k as f64))).collect();
    let mut g = c.benchmark_group("st_hosvd_4x300x100");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| st_hosvd(&slices, 4, 4, 8, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(kernels, gram_kernel, pod_kernel, training_kernel, hosvd_kernel);
criterion_main!(kernels);
