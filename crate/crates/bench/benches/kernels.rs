use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use spotvol::baselines::{regression_pairs, KernelConfig, LocalLinear};
use spotvol::estimation::{drift_lse, log_likelihood, theta_qmle, ThetaSearchConfig};
use spotvol::presets::{table_model, table_sim};
use spotvol::sde::generate_scenario_indexed;
use spotvol::volfilter::{run_filter, FilterParams, MomentKernel};
use spotvol_bench::estimation_segment;

fn moments(c: &mut Criterion) {
    let mut g = c.benchmark_group("moments");
    g.bench_function("kernel_new", |b| b.iter(|| MomentKernel::new(black_box(-0.14), black_box(0.25), 1.0 / 16000.0)));
    g.bench_function("kernel_new_degenerate", |b| {
        b.iter(|| MomentKernel::new(black_box(-0.14), black_box(-0.1401), 1.0 / 16000.0))
    });
    let k = MomentKernel::new(-0.14, 0.25, 1.0 / 16000.0);
    g.bench_function("moments", |b| b.iter(|| k.moments(black_box(0.1), black_box(6.25e-4), black_box(0.08), 0.0073)));
    g.finish();
}

fn filter(c: &mut Criterion) {
    let path = estimation_segment("quad", 1);
    let drift = drift_lse(&path).unwrap();
    let p = FilterParams::new(0.5, drift.alpha_hat, drift.beta_hat).unwrap();
    let mut g = c.benchmark_group("filter");
    g.bench_function("run_filter_2000", |b| b.iter(|| run_filter(black_box(&path), &p, 401).unwrap()));
    g.bench_function("log_likelihood_2000", |b| b.iter(|| log_likelihood(black_box(&path), &p, 401).unwrap()));
    g.sample_size(10);
    g.bench_function("theta_qmle_2000", |b| {
        b.iter(|| theta_qmle(black_box(&path), &drift, &ThetaSearchConfig::default(), 401).unwrap())
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let lin = table_model("lin").unwrap();
    let sim = table_sim(3);
    let mut g = c.benchmark_group("simulation");
    g.sample_size(20);
    g.bench_function("table_path_6000", |b| {
        b.iter(|| generate_scenario_indexed(&lin.model, &sim, black_box(0)).unwrap())
    });
    g.finish();
}

fn local_linear(c: &mut Criterion) {
    let path = estimation_segment("lin", 2);
    let pairs = regression_pairs(&path);
    let cfg = KernelConfig::new(0.15).unwrap();
    let mut g = c.benchmark_group("local_linear");
    g.bench_function("build_2000", |b| b.iter(|| LocalLinear::new(black_box(&pairs), cfg).unwrap()));
    let ll = LocalLinear::new(&pairs, cfg).unwrap();
    g.bench_function("fit_2000_points", |b| {
        b.iter(|| path.values.iter().map(|&x| ll.fit(x).map_or(0.0, |f| f.0)).sum::<f64>())
    });
    g.finish();
}

criterion_group!(benches, moments, filter, simulation, local_linear);
criterion_main!(benches);
