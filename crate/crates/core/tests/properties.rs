use proptest::prelude::*;
use rand::Rng;

use spectrum_core::analysis::{self, best_base, equilibrium_floor};
use spectrum_core::game::{self, UpdateOrder, DEFAULT_BUDGET};
use spectrum_core::learning;
use spectrum_core::mobility;
use spectrum_core::presets::{self, InstanceBounds};
use spectrum_core::{DeviationSpace, Profile, Scenario, ScenarioConfig, SeedRoot, Substream, UtilityNormalization};

fn small(seed: u64) -> Scenario {
    presets::random_instance(&InstanceBounds::default(), SeedRoot(seed))
        .validate()
        .unwrap()
}

fn bounded(bounds: InstanceBounds, seed: u64) -> Scenario {
    presets::random_instance(&bounds, SeedRoot(seed)).validate().unwrap()
}

fn any_profile(s: &Scenario, seed: u64) -> Profile {
    let mut rng = SeedRoot(seed).stream(Substream::Schedule);
    let locations = (0..s.num_users())
        .map(|n| {
            let allowed = &s.users[n].allowed_locations;
            allowed[rng.random_range(0..allowed.len())]
        })
        .collect();
    let channels = (0..s.num_users())
        .map(|_| rng.random_range(0..s.num_channels()))
        .collect();
    Profile::new(locations, channels)
}

fn any_sigma(s: &Scenario, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SeedRoot(seed).stream(Substream::ChannelChoice);
    (0..s.num_users())
        .map(|_| {
            let raw: Vec<f64> = (0..s.num_channels()).map(|_| rng.random_range(0.05..1.0)).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / t).collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn potential_tracks_weighted_utility_changes(seed in any::<u64>(), which in 0usize..3) {
        let s = small(seed);
        let prof = any_profile(&s, seed);
        let space = [DeviationSpace::Channels, DeviationSpace::Locations, DeviationSpace::Joint][which];
        let phi = game::potential(&s, &prof);
        for n in 0..s.num_users() {
            let u = game::utility(&s, &prof, n);
            game::for_each_deviation(&s, &prof.locations, &prof.channels, n, space, |action, reported| {
                let moved = prof.with_action(n, action);
                let du = game::utility(&s, &moved, n) - u;
                assert!((reported - game::utility(&s, &moved, n)).abs() < 1e-12);
                assert!((game::potential(&s, &moved) - phi - s.weight(n) * du).abs() < 1e-9);
            });
        }
    }

    #[test]
    fn better_response_runs_end_at_equilibria(seed in any::<u64>(), which in 0usize..3) {
        let s = small(seed);
        let start = any_profile(&s, seed);
        prop_assume!(game::profile_space_size(&s, &start, DeviationSpace::Joint) <= 10_000);
        let space = [DeviationSpace::Channels, DeviationSpace::Locations, DeviationSpace::Joint][which];
        let mut rng = SeedRoot(seed).stream(Substream::Schedule);
        let run = game::better_response_path(&s, &start, space, UpdateOrder::Shuffled, &mut rng);
        prop_assert!(run.potentials.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(game::is_nash(&s, &run.profile, space));
    }

    #[test]
    fn utilities_never_exceed_the_interference_free_value(seed in any::<u64>()) {
        let s = small(seed);
        let prof = any_profile(&s, seed);
        for n in 0..s.num_users() {
            prop_assert!(game::utility(&s, &prof, n) <= best_base(&s, n, prof.locations[n]) + 1e-12);
        }
    }

    #[test]
    fn every_equilibrium_meets_its_floor(seed in any::<u64>()) {
        let s = small(seed);
        let d = s.initial_locations();
        let base = Profile::new(d.clone(), vec![0; s.num_users()]);
        for ne in game::enumerate_nash(&s, &base, DeviationSpace::Channels, DEFAULT_BUDGET).unwrap() {
            for n in 0..s.num_users() {
                prop_assert!(game::utility(&s, &ne, n) >= equilibrium_floor(&s, &d, n) - 1e-9);
            }
        }
    }

    #[test]
    fn efficiency_sits_between_bound_and_one(seed in any::<u64>()) {
        let bounds = InstanceBounds { max_users: 5, p: (0.05, 0.4), rate: (40.0, 200.0), ..InstanceBounds::default() };
        let s = bounded(bounds, seed);
        let d = s.initial_locations();
        let report = analysis::poa(&s, &d, DEFAULT_BUDGET, None).unwrap();
        prop_assume!(report.applicable);
        prop_assert!(report.poa <= 1.0 + 1e-12);
        prop_assert!(report.bound_value <= report.poa + 1e-9);
    }

    #[test]
    fn gibbs_law_is_in_detailed_balance(seed in any::<u64>(), gamma in 0.0f64..20.0) {
        let bounds = InstanceBounds { max_users: 4, ..InstanceBounds::default() };
        let s = bounded(bounds, seed);
        let a = any_profile(&s, seed).channels;
        let pi = mobility::gibbs_distribution(&s, &a, gamma, DEFAULT_BUDGET).unwrap();
        prop_assert!((pi.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (d, &p) in pi.states.iter().zip(&pi.probabilities) {
            for n in 0..s.num_users() {
                for x in s.feasible_moves(n, d[n]) {
                    let mut e = d.clone();
                    e[n] = x;
                    let forward = p * mobility::transition_rate(&s, d, &e, &a, gamma).unwrap();
                    let back = pi.probability_of(&e) * mobility::transition_rate(&s, &e, d, &a, gamma).unwrap();
                    prop_assert!((forward - back).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_means_match_enumeration(seed in any::<u64>()) {
        let bounds = InstanceBounds { max_users: 4, ..InstanceBounds::default() };
        let s = bounded(bounds, seed);
        let d = s.initial_locations();
        let sigma = any_sigma(&s, seed);
        let closed = learning::expected_payoffs(&s, &d, &sigma);
        let brute = learning::expected_payoffs_enumerated(&s, &d, &sigma, DEFAULT_BUDGET).unwrap();
        for (r, e) in closed.iter().flatten().zip(brute.iter().flatten()) {
            prop_assert!((r - e).abs() < 1e-9);
        }
        let l = learning::expected_potential(&s, &d, &sigma, DEFAULT_BUDGET).unwrap();
        prop_assert!((l.value - learning::expected_potential_value(&s, &d, &sigma)).abs() < 1e-9);
    }

    #[test]
    fn expected_potential_rises_along_the_mean_dynamics(seed in any::<u64>()) {
        let bounds = InstanceBounds { max_users: 4, ..InstanceBounds::default() };
        let s = bounded(bounds, seed);
        let d = s.initial_locations();
        let path = learning::replicator_trajectory(&s, &d, any_sigma(&s, seed), 0.02, 100).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].potential >= w[0].potential - 1e-6);
        }
        for state in &path {
            for row in &state.sigma {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_keeps_equilibria(seed in any::<u64>()) {
        let s = small(seed);
        let d = s.initial_locations();
        let norm = UtilityNormalization::exact_for_channels(&s, &d, 0.05).unwrap();
        let base = Profile::new(d.clone(), vec![0; s.num_users()]);
        game::for_each_profile(&s, &base, DeviationSpace::Channels, DEFAULT_BUDGET, |locs, chans| {
            for n in 0..s.num_users() {
                let u = norm.apply(game::utility_at(&s, locs, chans, n));
                assert!(u >= 0.05 - 1e-9 && u <= 1.0 + 1e-9);
            }
        })
        .unwrap();
    }

    #[test]
    fn scenario_files_round_trip(seed in any::<u64>()) {
        let cfg = presets::random_instance(&InstanceBounds::default(), SeedRoot(seed));
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.validate().unwrap(), cfg.validate().unwrap());
    }

    #[test]
    fn mixed_strategies_are_distributions(z in proptest::collection::vec(1e-6f64..1e3, 1..8)) {
        let sigma = learning::mixed_strategy(&z).unwrap();
        prop_assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(sigma.iter().all(|&x| x > 0.0));
    }
}
