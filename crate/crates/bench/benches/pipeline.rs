//! Stage-by-stage timing of the fitting pipeline on the bundled examples:
//! block moments, the mode solves (double and double-double paths), the
//! residual diagnostics, and the end-to-end fits.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use impoly::geometry::{Grid, MultiIndex};
use impoly::moments::{moment, QuadOptions};
use impoly::solver::residual_report;
use impoly::tensorops::{mode_matrices, recover_coefficients, SolveOptions};
use impoly::fit_polynomial;
use impoly_bench::{kepler_problem, sphere_problem};

fn bench_moments(c: &mut Criterion) {
    let p = sphere_problem();
    let grid = Grid::uniform(p.domain().clone(), 6).expect("static grid");
    let quad = QuadOptions::default();
    c.bench_function("moments/sphere-6x6", |b| {
        b.iter(|| {
            moment(p.f(), &grid, p.interval(), p.orientation(), &quad)
                .expect("moments converge")
        })
    });
}

fn bench_solve(c: &mut Criterion) {
    let sphere = sphere_problem();
    let grid = Grid::uniform(sphere.domain().clone(), 6).expect("static grid");
    let d = moment(
        sphere.f(),
        &grid,
        sphere.interval(),
        sphere.orientation(),
        &QuadOptions::default(),
    )
    .expect("moments converge");
    let mats = mode_matrices(&grid, sphere.center());
    let opts = SolveOptions::default();
    c.bench_function("solve/sphere-6x6", |b| {
        b.iter_batched(
            || d.clone(),
            |d| recover_coefficients(&d, &mats, sphere.center(), &opts).expect("solvable"),
            BatchSize::SmallInput,
        )
    });

    let kepler = kepler_problem();
    let kgrid = Grid::uniform(kepler.domain().clone(), 28).expect("static grid");
    let kd = moment(
        kepler.f(),
        &kgrid,
        kepler.interval(),
        kepler.orientation(),
        &QuadOptions::default(),
    )
    .expect("moments converge");
    let kmats = mode_matrices(&kgrid, kepler.center());
    c.bench_function("solve/kepler-28-dd", |b| {
        b.iter_batched(
            || kd.clone(),
            |d| recover_coefficients(&d, &kmats, kepler.center(), &opts).expect("solvable"),
            BatchSize::SmallInput,
        )
    });
}

fn bench_diagnostics(c: &mut Criterion) {
    let p = sphere_problem();
    let report = fit_polynomial(&p, &MultiIndex::new(vec![6, 6])).expect("fit succeeds");
    c.bench_function("diagnostics/sphere-101x101", |b| {
        b.iter(|| residual_report(&p, report.coefficients(), 101).expect("grid evaluates"))
    });
}

fn bench_end_to_end(c: &mut Criterion) {
    let sphere = sphere_problem();
    let n2 = MultiIndex::new(vec![6, 6]);
    c.bench_function("fit/sphere-6x6", |b| {
        b.iter(|| fit_polynomial(&sphere, &n2).expect("fit succeeds"))
    });

    let kepler = kepler_problem();
    let n1 = MultiIndex::new(vec![28]);
    c.bench_function("fit/kepler-28", |b| {
        b.iter(|| fit_polynomial(&kepler, &n1).expect("fit succeeds"))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_moments, bench_solve, bench_diagnostics, bench_end_to_end
}
criterion_main!(benches);
