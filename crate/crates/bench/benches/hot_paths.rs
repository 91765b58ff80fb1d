use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evosnn_core::data::synthetic_blobs;
use evosnn_core::evolve::fast_nondominated_sort;
use evosnn_core::genome::random_genome;
use evosnn_core::snn::{Network, NeuronParams, Trace};
use evosnn_core::surrogate::features;
use evosnn_core::{decode, hypervolume_2d, DecodeConfig, GenomeConfig, RegressionTree, TreeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random(), rng.random())).collect()
}

fn sorting(c: &mut Criterion) {
    let mut group = c.benchmark_group("nondominated_sort");
    for n in [60, 200, 1000] {
        let pts = points(n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| fast_nondominated_sort(black_box(pts)))
        });
    }
    group.finish();
}

fn hypervolume(c: &mut Criterion) {
    let pts = points(500, 2);
    c.bench_function("hypervolume_500", |b| {
        b.iter(|| hypervolume_2d(black_box(&pts), (1.1, 1.1)).unwrap())
    });
}

fn forward(c: &mut Criterion) {
    let data = synthetic_blobs(4, 3);
    let mut group = c.benchmark_group("forward");
    for l in [1, 2, 4] {
        let g = random_genome(&GenomeConfig::new(l, 4, 2).unwrap(), 5).unwrap();
        let net = Network::new(decode(&g, &DecodeConfig::default()).unwrap(), 2, NeuronParams::default(), 0).unwrap();
        let mut trace = Trace::default();
        group.bench_function(BenchmarkId::new("modules", l), |b| {
            b.iter(|| net.forward(black_box(data.sample(0)), &mut trace).unwrap())
        });
    }
    group.finish();
}

fn tree_fit(c: &mut Criterion) {
    let cfg = GenomeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..300)
        .map(|i| features(&random_genome(&cfg, i).unwrap()))
        .collect();
    let y: Vec<f64> = x.iter().map(|r| r[..20].iter().sum::<f64>() + rng.random::<f64>()).collect();
    c.bench_function("tree_fit_300", |b| {
        b.iter(|| RegressionTree::fit(black_box(&x), black_box(&y), TreeParams::default()).unwrap())
    });
}

criterion_group!(benches, sorting, hypervolume, forward, tree_fit);
criterion_main!(benches);
