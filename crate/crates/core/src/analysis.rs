//! Efficiency of equilibria: price of anarchy, its lower bound, and
//! performance loss against the centralized optimum.
//!
//! At a location profile `d` write
//!
//! ```text
//! ϖ    = max_n -ln(1 - p_n)
//! E_n(d) = max_m ln(θ_m B^n_{m,d_n} p_n),   E(d) = min_n E_n(d)
//! K(d) = max_n |N_n(d)|
//! ```
//!
//! Every utility satisfies `U_n ≤ E_n(d)`, and at a Nash equilibrium
//! `U_n ≥ E_n(d) + Σ_{i ∈ N_n(d)} ln(1 - p_i)`, since user `n` could always
//! move to its best channel and suffer at most every neighbour there.
//! Summing gives `PoA ≥ 1 - K(d)ϖ/E(d)` whenever the totals involved are
//! positive.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{self, DeviationSpace, Profile};
use crate::normalization::UtilityNormalization;
use crate::scenario::{InterferenceGraph, Scenario};

/// Ingredients of the lower bound at one location profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundQuantities {
    pub varpi: f64,
    /// `E_n(d)` for every user.
    pub best_base: Vec<f64>,
    pub e_min: f64,
    pub max_degree: usize,
}

impl BoundQuantities {
    /// `1 - K(d)ϖ/E(d)`; meaningful only when `E(d) > 0`.
    pub fn bound(&self) -> f64 {
        if self.max_degree == 0 {
            1.0
        } else {
            1.0 - self.max_degree as f64 * self.varpi / self.e_min
        }
    }
}

/// `E_n(d)`: user `n`'s utility on its best channel with no competition.
pub fn best_base(s: &Scenario, n: usize, location: usize) -> f64 {
    (0..s.num_channels())
        .map(|m| s.log_base(n, m, location))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E_n(d) + Σ_{i ∈ N_n(d)} ln(1 - p_i)`, the utility every user is
/// guaranteed at a channel equilibrium.
pub fn equilibrium_floor(s: &Scenario, locations: &[usize], n: usize) -> f64 {
    let crowd: f64 = (0..s.num_users())
        .filter(|&i| s.interferes(n, i, locations[n], locations[i]))
        .map(|i| s.log_idle(i))
        .sum();
    best_base(s, n, locations[n]) + crowd
}

pub fn bound_quantities(s: &Scenario, locations: &[usize]) -> Result<BoundQuantities> {
    let graph = InterferenceGraph::build(s, locations)?;
    let varpi = (0..s.num_users()).map(|n| s.weight(n)).fold(0.0, f64::max);
    let best: Vec<f64> = (0..s.num_users()).map(|n| best_base(s, n, locations[n])).collect();
    Ok(BoundQuantities {
        varpi,
        e_min: best.iter().copied().fold(f64::INFINITY, f64::min),
        best_base: best,
        max_degree: graph.max_degree(),
    })
}

/// Price of anarchy recomputed on normalized utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedEfficiency {
    pub normalization: UtilityNormalization,
    pub worst_ne_value: f64,
    pub optimum_value: f64,
    pub poa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub locations: Vec<usize>,
    pub nash_set: Vec<Profile>,
    pub nash_totals: Vec<f64>,
    pub optimum: Profile,
    pub optimum_value: f64,
    pub worst_ne_value: f64,
    /// Worst equilibrium total over the optimal total, on raw utilities.
    pub poa: f64,
    pub quantities: BoundQuantities,
    pub bound_value: f64,
    /// Every equilibrium total, the optimum and `E(d)` are strictly
    /// positive, so the ratio and the bound are meaningful.
    pub applicable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized: Option<NormalizedEfficiency>,
}

impl EquilibriumReport {
    /// The bound and `PoA ≤ 1` both hold (trivially `true` when not
    /// applicable).
    pub fn bound_holds(&self, tol: f64) -> bool {
        !self.applicable || (self.bound_value <= self.poa + tol && self.poa <= 1.0 + tol)
    }
}

/// Exact price of anarchy of the channel game at fixed locations.
pub fn poa(
    s: &Scenario,
    locations: &[usize],
    budget: u128,
    normalization: Option<UtilityNormalization>,
) -> Result<EquilibriumReport> {
    let base = Profile::new(locations.to_vec(), vec![0; s.num_users()]);
    let nash_set = game::enumerate_nash(s, &base, DeviationSpace::Channels, budget)?;
    let (optimum, optimum_value) = game::centralized_optimum(s, &base, DeviationSpace::Channels, budget)?;
    let quantities = bound_quantities(s, locations)?;
    Ok(report(
        s,
        locations.to_vec(),
        nash_set,
        optimum,
        optimum_value,
        quantities,
        normalization,
    ))
}

fn report(
    s: &Scenario,
    locations: Vec<usize>,
    nash_set: Vec<Profile>,
    optimum: Profile,
    optimum_value: f64,
    quantities: BoundQuantities,
    normalization: Option<UtilityNormalization>,
) -> EquilibriumReport {
    let nash_totals: Vec<f64> = nash_set.iter().map(|p| game::total_utility(s, p)).collect();
    let worst_ne_value = nash_totals.iter().copied().fold(f64::INFINITY, f64::min);
    let applicable = optimum_value > 0.0 && quantities.e_min > 0.0 && nash_totals.iter().all(|&t| t > 0.0);
    let normalized = normalization.map(|norm| {
        let n = s.num_users();
        let shift = |total: f64| normalized_total(&norm, total, n);
        let worst = shift(worst_ne_value);
        let best = shift(optimum_value);
        NormalizedEfficiency {
            normalization: norm,
            worst_ne_value: worst,
            optimum_value: best,
            poa: worst / best,
        }
    });
    EquilibriumReport {
        locations,
        poa: worst_ne_value / optimum_value,
        bound_value: quantities.bound(),
        nash_set,
        nash_totals,
        optimum,
        optimum_value,
        worst_ne_value,
        quantities,
        applicable,
        normalized,
    }
}

/// Sum of normalized utilities, recovered from the raw total.
pub fn normalized_total(norm: &UtilityNormalization, raw_total: f64, n_users: usize) -> f64 {
    n_users as f64 * norm.apply(0.0) + norm.slope() * raw_total
}

/// Joint-game counterpart of the bound: `η = max_d K(d)/E(d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointBound {
    pub eta: f64,
    pub varpi: f64,
    /// `1 - ηϖ`.
    pub bound_value: f64,
    /// Location profile attaining `η`.
    pub argmax: Vec<usize>,
    /// `E(d) > 0` at every location profile.
    pub applicable: bool,
}

pub fn joint_bound(s: &Scenario, budget: u128) -> Result<JointBound> {
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    let mut eta = f64::NEG_INFINITY;
    let mut argmax = base.locations.clone();
    let mut applicable = true;
    let mut failure = None;
    game::for_each_profile(
        s,
        &base,
        DeviationSpace::Locations,
        budget,
        |d, _| match bound_quantities(s, d) {
            Ok(q) => {
                applicable &= q.e_min > 0.0;
                let ratio = q.max_degree as f64 / q.e_min;
                if ratio > eta {
                    eta = ratio;
                    argmax = d.to_vec();
                }
            }
            Err(e) => failure = Some(e),
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let varpi = (0..s.num_users()).map(|n| s.weight(n)).fold(0.0, f64::max);
    Ok(JointBound {
        eta,
        varpi,
        bound_value: 1.0 - eta * varpi,
        argmax,
        applicable,
    })
}

/// Exact efficiency of the joint game over all `(d, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub nash_set: Vec<Profile>,
    pub worst_ne_value: f64,
    pub optimum: Profile,
    pub optimum_value: f64,
    pub poa: f64,
    pub bound: JointBound,
    /// Equilibrium totals, the optimum and every `E(d)` are positive.
    pub applicable: bool,
}

pub fn joint_poa(s: &Scenario, budget: u128) -> Result<JointReport> {
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    let nash_set = game::enumerate_nash(s, &base, DeviationSpace::Joint, budget)?;
    let (optimum, optimum_value) = game::centralized_optimum(s, &base, DeviationSpace::Joint, budget)?;
    let bound = joint_bound(s, budget)?;
    let worst_ne_value = nash_set
        .iter()
        .map(|p| game::total_utility(s, p))
        .fold(f64::INFINITY, f64::min);
    let applicable = bound.applicable && optimum_value > 0.0 && worst_ne_value > 0.0;
    Ok(JointReport {
        poa: worst_ne_value / optimum_value,
        nash_set,
        worst_ne_value,
        optimum,
        optimum_value,
        bound,
        applicable,
    })
}

/// Relative shortfall `(optimum - run)/|optimum|` in percent.
pub fn performance_loss(run_value: f64, optimum_value: f64) -> f64 {
    (optimum_value - run_value) / optimum_value.abs() * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceLoss {
    pub run_value: f64,
    pub optimum_value: f64,
    /// Totals after the shared normalization, present when the raw
    /// optimum is not positive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifted: Option<[f64; 2]>,
    pub percent: f64,
}

/// Performance loss on raw totals, or on normalized totals when the raw
/// optimum is not positive.
pub fn performance_loss_report(
    run_value: f64,
    optimum_value: f64,
    n_users: usize,
    norm: &UtilityNormalization,
) -> PerformanceLoss {
    if optimum_value > 0.0 {
        return PerformanceLoss {
            run_value,
            optimum_value,
            shifted: None,
            percent: performance_loss(run_value, optimum_value),
        };
    }
    let run = normalized_total(norm, run_value, n_users);
    let opt = normalized_total(norm, optimum_value, n_users);
    PerformanceLoss {
        run_value,
        optimum_value,
        shifted: Some([run, opt]),
        percent: performance_loss(run, opt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::testing::uniqueness_instance;
    use crate::game::DEFAULT_BUDGET;
    use crate::normalization::DEFAULT_FLOOR;
    use crate::scenario::testing::{line_config, line_scenario};

    #[test]
    fn varpi_for_half_contention() {
        let s = line_scenario(
            1.0,
            &[0.5, 0.5],
            &[(0.5, vec![1.0, 2.0]), (0.5, vec![2.0, 1.0])],
            &[0.0, 5.0],
        );
        let q = bound_quantities(&s, &[0, 0]).unwrap();
        assert!((q.varpi - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(q.max_degree, 1);
        let far = bound_quantities(&s, &[0, 1]).unwrap();
        assert_eq!(far.max_degree, 0);
        assert_eq!(far.bound(), 1.0);
    }

    #[test]
    fn single_user_and_empty_graph_are_efficient() {
        let s = line_scenario(1.0, &[0.5, 0.8], &[(0.4, vec![30.0, 12.0])], &[0.0]);
        let r = poa(&s, &[0], DEFAULT_BUDGET, None).unwrap();
        assert_eq!(r.nash_set.len(), 1);
        assert!((r.poa - 1.0).abs() < 1e-15);

        let users = vec![(0.4, vec![3.0, 1.0]), (0.3, vec![0.5, 2.0]), (0.2, vec![1.0, 1.5])];
        let s = line_scenario(0.5, &[0.5, 0.5], &users, &[0.0, 1.0, 2.0]);
        let r = poa(&s, &[0, 1, 2], DEFAULT_BUDGET, None).unwrap();
        assert!((r.poa - 1.0).abs() < 1e-15);
        assert_eq!(r.quantities.max_degree, 0);
    }

    #[test]
    fn uniqueness_instance_has_no_loss_at_equilibrium() {
        let s = uniqueness_instance();
        let base = Profile::new(vec![0, 0], vec![0, 0]);
        let (_, opt) = game::centralized_optimum(&s, &base, DeviationSpace::Joint, DEFAULT_BUDGET).unwrap();
        let nash = game::enumerate_nash(&s, &base, DeviationSpace::Joint, DEFAULT_BUDGET).unwrap();
        assert_eq!(nash.len(), 8);
        for ne in &nash {
            let loss = performance_loss(game::total_utility(&s, ne), opt);
            assert!(loss.abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        assert_eq!(performance_loss(5.0, 5.0), 0.0);
        assert!((performance_loss(4.5, 5.0) - 10.0).abs() < 1e-12);
        let norm = UtilityNormalization::new(-10.0, 0.0, DEFAULT_FLOOR).unwrap();
        let rep = performance_loss_report(-8.0, -6.0, 2, &norm);
        let [run, opt] = rep.shifted.unwrap();
        assert!((run - (norm.apply(-4.0) + norm.apply(-4.0))).abs() < 1e-12);
        assert!(opt > run && rep.percent > 0.0);
    }

    #[test]
    fn adding_a_remote_location_does_not_raise_its_degree() {
        let users = vec![(0.3, vec![20.0, 9.0]), (0.4, vec![15.0, 25.0]), (0.5, vec![30.0, 30.0])];
        let mut cfg = line_config(1.0, &[0.5, 0.5], &users, &[0.0, 0.5]);
        let before = joint_bound(&cfg.validate().unwrap(), DEFAULT_BUDGET).unwrap();
        cfg.locations.coordinates.as_mut().unwrap().push([100.0, 0.0]);
        let s = cfg.validate().unwrap();
        let after = joint_bound(&s, DEFAULT_BUDGET).unwrap();
        for d in crate::mobility::location_profiles(&s, DEFAULT_BUDGET).unwrap() {
            for n in (0..3).filter(|&n| d[n] == 2 && d.iter().filter(|&&x| x == 2).count() == 1) {
                assert_eq!(InterferenceGraph::build(&s, &d).unwrap().degree(n), 0);
            }
        }
        assert!(after.eta <= before.eta + 1e-12);
    }
}
