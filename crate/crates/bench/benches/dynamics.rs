use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spectrum_bench::{grid, nine_node};
use spectrum_core::game::{self, DEFAULT_BUDGET};
use spectrum_core::learning::{self, LearningParams, PayoffEstimator, SlotSimulator};
use spectrum_core::mobility::{self, MobilityParams};
use spectrum_core::normalization::{UtilityNormalization, DEFAULT_FLOOR};
use spectrum_core::presets::NineNodeGraph;
use spectrum_core::{DeviationSpace, Profile, SeedRoot};

fn enumeration(c: &mut Criterion) {
    let s = grid();
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    c.bench_function("joint_nash_enumeration_grid", |b| {
        b.iter(|| game::enumerate_nash(&s, black_box(&base), DeviationSpace::Joint, DEFAULT_BUDGET).unwrap())
    });
    c.bench_function("gibbs_distribution_grid", |b| {
        b.iter(|| mobility::joint_gibbs_distribution(&s, black_box(1.0), DEFAULT_BUDGET).unwrap())
    });
}

fn learning_bench(c: &mut Criterion) {
    let s = nine_node(NineNodeGraph::Lattice);
    let d = s.initial_locations();
    let norm = UtilityNormalization::exact_for_channels(&s, &d, DEFAULT_FLOOR).unwrap();
    let estimator = PayoffEstimator {
        normalization: norm,
        q_floor: learning::DEFAULT_Q_FLOOR,
    };
    let channels: Vec<usize> = (0..s.num_users()).map(|n| n % s.num_channels()).collect();
    let mut sim = SlotSimulator::new(&s, SeedRoot(1));
    c.bench_function("slot_period_100", |b| {
        b.iter(|| sim.simulate_period(&d, black_box(&channels), 100, &estimator).unwrap())
    });
    let params = LearningParams {
        periods: 50,
        ..LearningParams::default()
    };
    c.bench_function("learning_50_periods", |b| {
        b.iter(|| learning::run_learning(&s, &d, black_box(&params), SeedRoot(2)).unwrap())
    });
}

fn mobility_bench(c: &mut Criterion) {
    let s = grid();
    let params = MobilityParams {
        horizon: 500.0,
        record_events: false,
        ..MobilityParams::default()
    };
    c.bench_function("joint_chain_grid", |b| {
        b.iter(|| mobility::run_joint(&s, black_box(&params), SeedRoot(3)).unwrap())
    });
}

criterion_group!(benches, enumeration, learning_bench, mobility_bench);
criterion_main!(benches);
