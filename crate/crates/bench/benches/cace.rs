use cace_bench::dataset;
use cace_core::{
    reg_intervals, run_study_with, wald_delta_interval, wald_ld_set, DesignMatrix, HcFlavor,
    QrFactor, SimConfig,
};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn qr(c: &mut Criterion) {
    let mut g = c.benchmark_group("qr_interacted");
    for n in [200, 400, 2000] {
        let d = dataset(n, 5, 1);
        let design = DesignMatrix::interacted(d.z(), d.covariates(), d.covariate_names()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &design, |b, design| {
            b.iter(|| QrFactor::new(black_box(design)).unwrap())
        });
    }
    g.finish();
}

fn intervals(c: &mut Criterion) {
    let d = dataset(400, 5, 2);
    c.bench_function("wald_ld_n400", |b| {
        b.iter(|| wald_ld_set(black_box(&d), 0.05).unwrap())
    });
    c.bench_function("wald_delta_n400", |b| {
        b.iter(|| wald_delta_interval(black_box(&d), 0.05).unwrap())
    });
    c.bench_function("reg_all_hc_n400_k5", |b| {
        b.iter(|| {
            reg_intervals(
                black_box(&d),
                0.05,
                &[HcFlavor::Ehw, HcFlavor::Hc2, HcFlavor::Hc3],
            )
            .unwrap()
        })
    });
}

fn study(c: &mut Criterion) {
    let cfg = SimConfig {
        n: 400,
        reps: 100,
        seed: 3,
        ..SimConfig::default()
    };
    let mut g = c.benchmark_group("study_n400_reps100");
    g.sample_size(10);
    for threads in [1, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(threads), &threads, |b, &t| {
            b.iter(|| run_study_with(black_box(&cfg), Some(t)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, qr, intervals, study);
criterion_main!(benches);
