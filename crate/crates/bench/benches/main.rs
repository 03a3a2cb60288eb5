use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use qsc_core::dilation::{build_block_rep, explicit_dilate, kolmogorov_dilate, verify_dilation};
use qsc_core::generator::{build_germ, ccp_check, dissipation_psd_check};
use qsc_core::kernel::{kernel_ode_solve, CoherentFunction};
use qsc_core::linalg::{matrix_exp, seeded_matrix};
use qsc_core::model::ModelSpec;
use qsc_core::trajectory::{ensemble_average, EnsembleSpec, Scheme};
use qsc_core::ComplexMatrix;

fn bench_linalg(c: &mut Criterion) {
    let mut group = c.benchmark_group("linalg");
    for n in [4usize, 8, 16] {
        let a = seeded_matrix(n as u64, n, n, 0.5);
        group.bench_with_input(BenchmarkId::new("matrix_exp", n), &a, |b, a| {
            b.iter(|| matrix_exp(a).unwrap());
        });
        let h = a.hermitian_part();
        group.bench_with_input(BenchmarkId::new("eigh_values", n), &h, |b, h| {
            b.iter(|| qsc_core::linalg::eigh_values(h).unwrap());
        });
    }
    group.finish();
}

fn bench_generator(c: &mut Criterion) {
    let mut group = c.benchmark_group("generator");
    for seed in [22u64, 8] {
        let model = ModelSpec::seeded(seed);
        let label = format!("n{}d{}r{}", model.n, model.d, model.r);
        group.bench_with_input(BenchmarkId::new("build_germ", &label), &model, |b, m| {
            b.iter(|| build_germ(m));
        });
        let germ = build_germ(&model);
        group.bench_with_input(BenchmarkId::new("ccp_check", &label), &germ, |b, g| {
            b.iter(|| ccp_check(g, 1e-9).unwrap());
        });
        group.bench_with_input(
            BenchmarkId::new("dissipation_psd", &label),
            &germ,
            |b, g| {
                b.iter(|| dissipation_psd_check(g, 1e-9).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_dilation(c: &mut Criterion) {
    let mut group = c.benchmark_group("dilation");
    let model = ModelSpec::seeded(22); // n=3, d=2, r=2
    let germ = build_germ(&model);
    group.bench_function("kolmogorov_dilate_n3d2", |b| {
        b.iter(|| kolmogorov_dilate(&germ, 1e-8).unwrap());
    });
    let rep = build_block_rep(explicit_dilate(&model));
    group.bench_function("verify_dilation_50", |b| {
        b.iter(|| verify_dilation(&germ, &rep, 50, 1e-10));
    });
    group.finish();
}

fn bench_trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectory");
    group.sample_size(10);
    let model = ModelSpec::amplitude_damping();
    let psi0 = {
        let mut v = ComplexMatrix::zeros(2, 1);
        v[(1, 0)] = qsc_core::linalg::C64::new(1.0, 0.0);
        v
    };
    for scheme in [Scheme::Diffusive, Scheme::Jump] {
        let spec = EnsembleSpec {
            scheme,
            k: model.drift.clone(),
            l: model.coupling[0].clone(),
            psi0: psi0.clone(),
            dt: 1e-3,
            steps: 1000,
        };
        let label = match scheme {
            Scheme::Diffusive => "diffusive_500x1000",
            Scheme::Jump => "jump_500x1000",
        };
        group.bench_function(label, |b| {
            b.iter(|| ensemble_average(&spec, 500, 7).unwrap());
        });
    }
    group.finish();
}

fn bench_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    let germ = build_germ(&ModelSpec::seeded(22));
    let funcs = vec![
        CoherentFunction::zero(germ.d),
        CoherentFunction::constant(
            germ.d,
            vec![qsc_core::linalg::C64::new(0.3, 0.1); germ.d],
            0.0,
            1.0,
        )
        .unwrap(),
    ];
    let pairs = qsc_core::kernel::all_pairs(2);
    group.bench_function("kernel_ode_4pairs_1000steps", |b| {
        b.iter(|| kernel_ode_solve(&germ, &funcs, &pairs, 1.0, 1e-3).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_linalg,
    bench_generator,
    bench_dilation,
    bench_trajectory,
    bench_kernel
);
criterion_main!(benches);
