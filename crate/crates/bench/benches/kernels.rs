use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scramble_core::ed::{ExactPropagator, Model};
use scramble_core::fermion::{self, XYParams};
use scramble_core::grid::Parties;
use scramble_core::linalg::c;
use scramble_core::magnon::{self, HeisenbergOneMagnon, TwoMagnonSector};
use scramble_core::measures;
use scramble_core::qdp::{self, SurfaceRequest, ZOneMagnonProcess};
use scramble_core::{grid, ChainSpec, HeisenbergParams};

const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn one_magnon(cr: &mut Criterion) {
    let chain = ChainSpec::periodic(20).unwrap();
    let p = HeisenbergParams::default();
    cr.bench_function("one_magnon_propagator_n20", |b| {
        b.iter(|| magnon::one_magnon_propagator(&chain, &p, black_box(3.7)))
    });
}

fn two_magnon(cr: &mut Criterion) {
    let chain = ChainSpec::periodic(20).unwrap();
    let p = HeisenbergParams::default();
    cr.bench_function("two_magnon_sector_n20", |b| {
        b.iter(|| TwoMagnonSector::new(&chain, black_box(&p)).unwrap())
    });
}

fn xy_rdm(cr: &mut Criterion) {
    let chain = ChainSpec::periodic(20).unwrap();
    let p = XYParams::new(0.7, 0.3, 1.0).unwrap();
    cr.bench_function("xy_nn_rdm_n20", |b| {
        b.iter(|| fermion::nn_rdm_xy(5, 6, black_box(2.5), c(S, 0.0), c(S, 0.0), &chain, &p).unwrap())
    });
}

fn exact(cr: &mut Criterion) {
    let chain = ChainSpec::periodic(10).unwrap();
    let model = Model::Xy(XYParams::new(0.7, 0.3, 1.0).unwrap());
    let mut g = cr.benchmark_group("exact");
    g.sample_size(10);
    g.bench_function("xy_propagator_n10", |b| {
        b.iter(|| ExactPropagator::new(black_box(&model), &chain).unwrap())
    });
    g.finish();
}

fn tmi(cr: &mut Criterion) {
    let rho = measures::build_pq_mixture(0.4, 0.3).unwrap();
    cr.bench_function("tmi_three_qubits", |b| {
        b.iter(|| measures::tmi(black_box(&rho), &[1], &[2], &[3]).unwrap())
    });
}

fn z_surface(cr: &mut Criterion) {
    let chain = ChainSpec::periodic(20).unwrap();
    let process = ZOneMagnonProcess::new(
        HeisenbergOneMagnon {
            chain,
            params: HeisenbergParams::default(),
        },
        magnon::one_magnon_pair_state(chain, c(S, 0.0), c(S, 0.0)).unwrap(),
        2,
    )
    .unwrap();
    let requests = [SurfaceRequest::tilde(grid::Measure::Tmi, Parties::triple(1, 2, 3))];
    let times = grid::linspace(0.0, 10.0, 21);
    let epochs = grid::linspace(0.0, 5.0, 11);
    let mut g = cr.benchmark_group("qdp");
    g.sample_size(10);
    g.bench_function("z_measurement_tmi_11x21", |b| {
        b.iter(|| qdp::delta_surfaces(&process, &requests, &times, &epochs).unwrap())
    });
    g.finish();
}

criterion_group!(benches, one_magnon, two_magnon, xy_rdm, exact, tmi, z_surface);
criterion_main!(benches);
