use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mesofd::harness::example_problem;
use mesofd::stability::{frozen_ncde_spec, spectral_scan, symbol_decomposition};
use mesofd::stepper::{initialize, step, ExecMode};

fn bench_step_kernel(c: &mut Criterion) {
    let setup = example_problem(2, 1, 40, 192).expect("example setup");
    let base = initialize(
        &setup.problem,
        &setup.grid,
        &setup.scheme,
        &setup.lattice,
        &setup.builder,
        ExecMode::Sequential,
    )
    .expect("init");

    let mut group = c.benchmark_group("step_80x80");
    for (label, mode) in [
        ("sequential", ExecMode::Sequential),
        ("parallel", ExecMode::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter_batched(
                || base.clone(),
                |mut s| {
                    step(
                        &mut s,
                        &setup.scheme,
                        &setup.problem,
                        &setup.grid,
                        &setup.lattice,
                        &setup.builder,
                        mode,
                    )
                    .unwrap();
                    s
                },
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn bench_spectral_scan(c: &mut Criterion) {
    let setup = example_problem(2, 1, 40, 96).expect("example setup");
    let spec = frozen_ncde_spec(&setup.lattice, setup.problem.velocity, 1.0, 1.0);
    let dec = symbol_decomposition(&setup.lattice, &spec).expect("decomposition");

    let mut group = c.benchmark_group("spectral_scan_64");
    group.bench_function("default", |b| {
        b.iter(|| spectral_scan(&setup.scheme, &dec, 64).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_step_kernel, bench_spectral_scan);
criterion_main!(benches);
