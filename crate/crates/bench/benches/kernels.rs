use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use greedy_gmrf::baselines::{fit_glasso_warm, LassoConfig};
use greedy_gmrf::greedy::global::forward_scan;
use greedy_gmrf::linalg::pair_update_inverse_in_place;
use greedy_gmrf::models::{make_chain_cov, sample_covariance, sample_gaussian};
use greedy_gmrf::{fit_all_neighborhoods, fit_global_greedy, stopping_threshold, GreedyConfig, PrecisionState};

fn sample_cov(p: usize, beta: f64) -> (greedy_gmrf::SymmetricMatrix, usize) {
    let n = (beta * 70.0 * 2.0 * (p as f64).ln()).ceil() as usize;
    let sigma = make_chain_cov(p, 0.5).unwrap();
    (sample_covariance(&sample_gaussian(&sigma, n, 1).unwrap()), n)
}

fn pair_update(c: &mut Criterion) {
    let mut g = c.benchmark_group("pair_update");
    for p in [36, 100] {
        let sigma = make_chain_cov(p, 0.5).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, _| {
            let mut w = sigma.clone();
            let mut sign = 1.0;
            b.iter(|| {
                sign = -sign;
                pair_update_inverse_in_place(&mut w, 0, 1, black_box(1e-3 * sign)).unwrap();
            })
        });
    }
    g.finish();
}

fn scan(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_scan");
    for p in [36, 64, 100] {
        let (s, _) = sample_cov(p, 1.0);
        let state = PrecisionState::identity(&s, 50);
        g.bench_with_input(BenchmarkId::new("sequential", p), &p, |b, _| {
            b.iter(|| forward_scan(&state, &s, false).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("parallel", p), &p, |b, _| {
            b.iter(|| forward_scan(&state, &s, true).unwrap())
        });
    }
    g.finish();
}

fn fits(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for p in [36, 64] {
        let (s, n) = sample_cov(p, 1.0);
        let cfg = GreedyConfig::new(stopping_threshold(4.0, 2, p, n));
        g.bench_with_input(BenchmarkId::new("global_greedy", p), &p, |b, _| {
            b.iter(|| fit_global_greedy(&s, &cfg).unwrap())
        });
        let x = sample_gaussian(&make_chain_cov(p, 0.5).unwrap(), n, 1).unwrap();
        g.bench_with_input(BenchmarkId::new("nbd_greedy", p), &p, |b, _| {
            b.iter(|| fit_all_neighborhoods(&x, &cfg).unwrap())
        });
        let lambda = (p as f64).ln().sqrt() / (n as f64).sqrt();
        let lcfg = LassoConfig::default().with_tol(1e-7);
        g.bench_with_input(BenchmarkId::new("glasso", p), &p, |b, _| {
            b.iter(|| fit_glasso_warm(&s, lambda, &lcfg, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, pair_update, scan, fits);
criterion_main!(benches);
