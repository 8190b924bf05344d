use std::hint::black_box;

use bean_limit_core::data::{Radial, Stream};
use bean_limit_core::field::laplacian5;
use bean_limit_core::*;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn grid(n: usize) -> GridSpec {
    GridSpec::new(2.0, n).unwrap()
}

fn bench_stencils(c: &mut Criterion) {
    let mut group = c.benchmark_group("stencil");
    for n in [64, 128, 256] {
        let phi = Stream::Bump { amplitude: 0.2, radius: 1.2 }.potential(grid(n));
        group.bench_with_input(BenchmarkId::new("laplacian5", n), &phi, |b, phi| b.iter(|| laplacian5(black_box(phi))));
        let h = from_stream(&phi);
        group.bench_with_input(BenchmarkId::new("curl_z", n), &h, |b, h| b.iter(|| curl_z(black_box(h))));
    }
    group.finish();
}

fn bench_pme_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("pme_step");
    for (m, n) in [(8.0, 64), (32.0, 64), (8.0, 128)] {
        let g = grid(n);
        let u = Radial::Bump { height: 0.9, radius: 1.0 }.field(g);
        let src = Radial::Bump { height: 0.4, radius: 0.8 }.field(g);
        let problem = PmeProblem::new(PowerLaw::new(m).unwrap(), u.clone(), Forcing::Steady(src), 1.0).unwrap();
        let cfg = PmeConfig::new(0.02, vec![]);
        group.bench_function(BenchmarkId::new(format!("m={m}"), n), |b| {
            b.iter(|| pme_step(black_box(&u), 0.0, 0.02, &problem, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_psor(c: &mut Criterion) {
    let mut group = c.benchmark_group("psor");
    group.sample_size(10);
    for n in [64, 128] {
        let g = grid(n);
        let q = Radial::Bump { height: 1.5, radius: 1.0 }.field(g).map(|v| v - 0.5);
        let data = ObstacleData::new(q);
        let opts = PsorOptions::tuned(&g);
        group.bench_with_input(BenchmarkId::new("bump", n), &data, |b, d| b.iter(|| psor_solve(black_box(d), &opts).unwrap()));
    }
    group.finish();
}

fn bench_curl(c: &mut Criterion) {
    let mut group = c.benchmark_group("curl_step");
    for p in [4.0, 16.0] {
        let g = grid(64);
        let h0 = from_stream(&Stream::Bump { amplitude: 0.03, radius: 1.2 }.potential(g));
        let forcing = Forcing::Steady(from_stream(&Stream::Bump { amplitude: 0.5, radius: 1.2 }.potential(g)));
        let problem = CurlProblem::new(p, h0.clone(), forcing, 1.0).unwrap();
        let dt = 0.5 * g.cell_area() / (8.0 * (p - 1.0));
        group.bench_function(BenchmarkId::new("p", p), |b| b.iter(|| curl_step(black_box(&h0), 0.0, dt, &problem).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_stencils, bench_pme_step, bench_psor, bench_curl);
criterion_main!(benches);
