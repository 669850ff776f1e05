use spectrum_core::analysis;
use spectrum_core::game::{self, DEFAULT_BUDGET};
use spectrum_core::mobility::{self, MobilityParams};
use spectrum_core::normalization::DEFAULT_FLOOR;
use spectrum_core::presets::{self, NineNodeGraph, Preset, PresetOptions};
use spectrum_core::{DeviationSpace, Profile, Scenario, SeedRoot, UtilityNormalization};

fn preset(p: Preset, opts: PresetOptions) -> Scenario {
    presets::generate(p, &opts, SeedRoot(0)).unwrap().validate().unwrap()
}

fn uniqueness() -> Scenario {
    preset(Preset::Uniqueness2x2x2, PresetOptions::default())
}

#[test]
fn homogeneous_contention_of_one_half_gives_ln_two() {
    let s = uniqueness();
    let q = analysis::bound_quantities(&s, &s.initial_locations()).unwrap();
    assert!((q.varpi - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn lattice_of_nine_has_degree_four() {
    let s = preset(
        Preset::Paper9x5,
        PresetOptions {
            graph: Some(NineNodeGraph::Lattice),
            ..Default::default()
        },
    );
    let q = analysis::bound_quantities(&s, &s.initial_locations()).unwrap();
    assert_eq!(q.max_degree, 4);
}

#[test]
fn nine_user_rates_follow_three_groups() {
    let s = preset(Preset::Paper9x5, PresetOptions::default());
    let d = s.initial_locations();
    for n in 0..9 {
        let group = presets::BENCHMARK_RATE_GROUPS[n / 3];
        for (m, &b) in group.iter().enumerate() {
            assert_eq!(s.mean_rate(n, m, d[n]), b);
        }
    }
}

#[test]
fn all_eight_equilibria_are_optimal() {
    let s = uniqueness();
    let base = Profile::new(s.initial_locations(), vec![0; 2]);
    let (_, opt) = game::centralized_optimum(&s, &base, DeviationSpace::Joint, DEFAULT_BUDGET).unwrap();
    let nash = game::enumerate_nash(&s, &base, DeviationSpace::Joint, DEFAULT_BUDGET).unwrap();
    assert_eq!(nash.len(), 8);
    let norm = UtilityNormalization::exact_for_joint(&s, DEFAULT_FLOOR).unwrap();
    for ne in &nash {
        let loss = analysis::performance_loss_report(game::total_utility(&s, ne), opt, 2, &norm);
        assert!(loss.percent.abs() < 1e-9);
    }
}

#[test]
fn lone_user_has_no_price_of_anarchy() {
    let mut cfg = presets::generate(Preset::Uniqueness2x2x2, &PresetOptions::default(), SeedRoot(0)).unwrap();
    cfg.users.truncate(1);
    cfg.rates.base_means.as_mut().unwrap().truncate(1);
    let s = cfg.validate().unwrap();
    let report = analysis::poa(&s, &s.initial_locations(), DEFAULT_BUDGET, None).unwrap();
    assert_eq!(report.quantities.max_degree, 0);
    assert_eq!(report.bound_value, 1.0);
    assert!((report.poa - 1.0).abs() < 1e-15);
}

#[test]
fn joint_chain_on_the_two_user_instance_settles_on_an_equilibrium() {
    let s = uniqueness();
    let params = MobilityParams {
        gamma: 50.0,
        horizon: 500.0,
        record_events: false,
        ..MobilityParams::default()
    };
    for seed in 0..5 {
        let trace = mobility::run_joint(&s, &params, SeedRoot(seed)).unwrap();
        assert!(game::is_nash(&s, &trace.final_profile, DeviationSpace::Joint));
    }
}

#[test]
fn empty_graph_equilibria_are_optimal() {
    let s = preset(
        Preset::RegularRing,
        PresetOptions {
            users: Some(4),
            ring_reach: Some(0),
            channels: Some(3),
            ..Default::default()
        },
    );
    let report = analysis::poa(&s, &s.initial_locations(), DEFAULT_BUDGET, None).unwrap();
    assert_eq!(report.quantities.max_degree, 0);
    assert!((report.worst_ne_value - report.optimum_value).abs() < 1e-12);
}
