use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use hdclt_bench::{ar1_dataset, rho_fixture, unit_ball3, unit_disk, SEED};
use hdclt_core::bounds::{m_hat_x, orlicz_norm};
use hdclt_core::datagen::{sample_dataset, DesignKind};
use hdclt_core::experiments::smooth_max;
use hdclt_core::geometry::sparsify_to_polytope;
use hdclt_core::montecarlo::{estimate_rho, estimate_rho_boot, BootMode};

const R: usize = 2_000;

fn datagen(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_dataset");
    for (name, kind) in [
        ("rademacher", DesignKind::Rademacher),
        ("trunc_exp", DesignKind::TruncatedExponential { scale: 1.0 }),
        ("gaussian", DesignKind::GaussianExact),
    ] {
        let design = hdclt_core::datagen::DesignSpec::new(kind, 100);
        g.throughput(Throughput::Elements(1000 * 100));
        g.bench_function(name, |b| b.iter(|| sample_dataset(&design, 1000, SEED).unwrap()));
    }
    g.finish();
}

fn rho(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_rho");
    g.sample_size(10);
    for n in [25usize, 100, 400] {
        let f = rho_fixture(DesignKind::Rademacher, 200, n, 100);
        g.throughput(Throughput::Elements(2 * R as u64));
        g.bench_with_input(BenchmarkId::new("rademacher_p200", n), &f, |b, f| {
            b.iter(|| estimate_rho(&f.design, f.n, &f.sigma, &f.family, R, SEED).unwrap())
        });
    }
    let f = rho_fixture(DesignKind::TruncatedExponential { scale: 1.0 }, 50, 100, 100);
    g.bench_function("trunc_exp_p50_n100", |b| {
        b.iter(|| estimate_rho(&f.design, f.n, &f.sigma, &f.family, R, SEED).unwrap())
    });
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let ds = ar1_dataset(20, 2000);
    let f = rho_fixture(DesignKind::GaussianExact, 20, 1, 50);
    let mut g = c.benchmark_group("bootstrap");
    g.sample_size(10);
    for (name, mode) in [("multiplier", BootMode::Multiplier), ("empirical", BootMode::Empirical)] {
        g.bench_function(name, |b| b.iter(|| estimate_rho_boot(&ds, &f.sigma, &f.family, R, SEED, mode).unwrap()));
    }
    g.finish();
}

fn bounds(c: &mut Criterion) {
    let design = hdclt_core::datagen::DesignSpec::new(DesignKind::TruncatedExponential { scale: 1.0 }, 200);
    let ds = sample_dataset(&design, 2000, SEED).unwrap();
    c.bench_function("m_hat_x_n2000_p200", |b| b.iter(|| m_hat_x(&ds, 1.5).unwrap()));
    let column: Vec<f64> = ds.rows().map(|r| r[0]).collect();
    c.bench_function("orlicz_norm_n2000", |b| b.iter(|| orlicz_norm(&column, 1.0).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let disk = unit_disk();
    let ball = unit_ball3();
    c.bench_function("sparsify_disk_eps1e-3", |b| b.iter(|| sparsify_to_polytope(&disk, 1e-3).unwrap()));
    c.bench_function("sparsify_ball3_eps1e-2", |b| b.iter(|| sparsify_to_polytope(&ball, 1e-2).unwrap()));
}

fn smoothmax(c: &mut Criterion) {
    let w: Vec<f64> = (0..1000).map(|j| ((j * 37) % 101) as f64 - 50.0).collect();
    let y = vec![0.0; 1000];
    c.bench_function("smooth_max_p1000", |b| b.iter(|| smooth_max(10.0, &w, &y)));
}

criterion_group!(benches, datagen, rho, bootstrap, bounds, geometry, smoothmax);
criterion_main!(benches);
