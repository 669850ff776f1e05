//! Exact game-theoretic core shared by the channel-selection game, the
//! strategic mobility game and the joint game.
//!
//! All three games use the proportional-fair utility
//!
//! ```text
//! U_n(d, a) = ln(θ_{a_n} B^n_{a_n,d_n} p_n) + Σ_{i ∈ N_n^{a_n}(d,a)} ln(1 - p_i)
//! ```
//!
//! and admit the weighted potential
//!
//! ```text
//! Φ(d, a) = Σ_i -ln(1 - p_i) · ( ½ Σ_{j ∈ N_i^{a_i}} ln(1 - p_j) + ln(θ_{a_i} B^i_{a_i,d_i} p_i) )
//! ```
//!
//! with weights `w_n = -ln(1 - p_n)`. Which coordinates a player may change
//! is selected by [`DeviationSpace`].

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Default cap on the number of profiles an exhaustive search may visit.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Relative slack below which a utility gain is not considered a strict
/// improvement. Guards equilibrium checks against summation-order noise.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

/// A joint state: one location and one channel per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Profile {
    pub locations: Vec<usize>,
    pub channels: Vec<usize>,
}

impl Profile {
    pub fn new(locations: Vec<usize>, channels: Vec<usize>) -> Self {
        Self { locations, channels }
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn action(&self, n: usize) -> Action {
        Action {
            location: self.locations[n],
            channel: self.channels[n],
        }
    }

    pub fn with_action(&self, n: usize, action: Action) -> Profile {
        let mut next = self.clone();
        next.locations[n] = action.location;
        next.channels[n] = action.channel;
        next
    }

    pub fn validate(&self, s: &Scenario) -> Result<()> {
        let n = s.num_users();
        if self.locations.len() != n || self.channels.len() != n {
            return Err(Error::Domain(format!(
                "profile has {} locations and {} channels for {n} users",
                self.locations.len(),
                self.channels.len()
            )));
        }
        for (u, (&d, &m)) in self.locations.iter().zip(&self.channels).enumerate() {
            if m >= s.num_channels() {
                return Err(Error::Index {
                    kind: "channel",
                    index: m,
                    size: s.num_channels(),
                });
            }
            if s.users[u].allowed_locations.binary_search(&d).is_err() {
                return Err(Error::Domain(format!(
                    "user {u} is at location {d}, which is not in its allowed set"
                )));
            }
        }
        Ok(())
    }
}

/// One user's strategy in the joint game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub location: usize,
    pub channel: usize,
}

/// Which part of a user's strategy a unilateral deviation may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationSpace {
    /// Channel only, location fixed.
    Channels,
    /// Location only (anywhere in the user's allowed set), channel fixed.
    Locations,
    /// Location and channel together.
    Joint,
}

/// Long-run expected throughput of user `n`:
/// `θ_{a_n} B^n_{a_n,d_n} p_n Π_{i ∈ N_n^{a_n}} (1 - p_i)`.
pub fn expected_throughput(s: &Scenario, prof: &Profile, n: usize) -> f64 {
    let d = prof.locations[n];
    let m = prof.channels[n];
    let survive: f64 = same_channel_neighbors(s, &prof.locations, &prof.channels, n, d, m)
        .map(|i| 1.0 - s.users[i].p)
        .product();
    s.theta(m) * s.mean_rate(n, m, d) * s.users[n].p * survive
}

/// Proportional-fair utility `ln Q_n`, evaluated in log space.
#[inline]
pub fn utility(s: &Scenario, prof: &Profile, n: usize) -> f64 {
    utility_at(s, &prof.locations, &prof.channels, n)
}

/// [`utility`] on raw location and channel slices.
#[inline]
pub fn utility_at(s: &Scenario, locations: &[usize], channels: &[usize], n: usize) -> f64 {
    deviation_utility(s, locations, channels, n, locations[n], channels[n])
}

/// Utility user `n` would get by playing `(location, channel)` while
/// everyone else keeps their strategy.
#[inline]
pub fn deviation_utility(
    s: &Scenario,
    locations: &[usize],
    channels: &[usize],
    n: usize,
    location: usize,
    channel: usize,
) -> f64 {
    s.log_base(n, channel, location)
        + same_channel_neighbors(s, locations, channels, n, location, channel)
            .map(|i| s.log_idle(i))
            .sum::<f64>()
}

/// Generalized congestion level: `Σ ln(1 - p_i)` over same-channel
/// interfering neighbours of user `n`.
pub fn congestion_level(s: &Scenario, prof: &Profile, n: usize) -> f64 {
    same_channel_neighbors(
        s,
        &prof.locations,
        &prof.channels,
        n,
        prof.locations[n],
        prof.channels[n],
    )
    .map(|i| s.log_idle(i))
    .sum()
}

fn same_channel_neighbors<'a>(
    s: &'a Scenario,
    locations: &'a [usize],
    channels: &'a [usize],
    n: usize,
    location: usize,
    channel: usize,
) -> impl Iterator<Item = usize> + 'a {
    (0..channels.len()).filter(move |&i| channels[i] == channel && s.interferes(n, i, location, locations[i]))
}

pub fn total_utility(s: &Scenario, prof: &Profile) -> f64 {
    total_utility_at(s, &prof.locations, &prof.channels)
}

pub fn total_utility_at(s: &Scenario, locations: &[usize], channels: &[usize]) -> f64 {
    (0..channels.len()).map(|n| utility_at(s, locations, channels, n)).sum()
}

/// The weighted potential `Φ(d, a)`.
pub fn potential(s: &Scenario, prof: &Profile) -> f64 {
    potential_at(s, &prof.locations, &prof.channels)
}

pub fn potential_at(s: &Scenario, locations: &[usize], channels: &[usize]) -> f64 {
    let mut phi = 0.0;
    for i in 0..channels.len() {
        let (d, m) = (locations[i], channels[i]);
        let congestion: f64 = same_channel_neighbors(s, locations, channels, i, d, m)
            .map(|j| s.log_idle(j))
            .sum();
        phi += s.weight(i) * (0.5 * congestion + s.log_base(i, m, d));
    }
    phi
}

/// `true` when `candidate` beats `current` by more than the relative
/// tolerance.
#[inline]
pub fn strictly_better(candidate: f64, current: f64) -> bool {
    candidate > current + IMPROVEMENT_TOL * (1.0 + current.abs())
}

/// Calls `f(action, utility)` for every action of user `n` in `space`, in
/// increasing `(location, channel)` order.
pub fn for_each_deviation(
    s: &Scenario,
    locations: &[usize],
    channels: &[usize],
    n: usize,
    space: DeviationSpace,
    mut f: impl FnMut(Action, f64),
) {
    let n_ch = s.num_channels();
    let mut congestion = vec![0.0; n_ch];
    let mut per_location = |x: usize, only: Option<usize>| {
        congestion.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..channels.len() {
            if s.interferes(n, i, x, locations[i]) {
                congestion[channels[i]] += s.log_idle(i);
            }
        }
        match only {
            Some(m) => f(
                Action {
                    location: x,
                    channel: m,
                },
                s.log_base(n, m, x) + congestion[m],
            ),
            None => {
                for m in 0..n_ch {
                    f(
                        Action {
                            location: x,
                            channel: m,
                        },
                        s.log_base(n, m, x) + congestion[m],
                    );
                }
            }
        }
    };
    match space {
        DeviationSpace::Channels => per_location(locations[n], None),
        DeviationSpace::Locations => {
            for &x in &s.users[n].allowed_locations {
                per_location(x, Some(channels[n]));
            }
        }
        DeviationSpace::Joint => {
            for &x in &s.users[n].allowed_locations {
                per_location(x, None);
            }
        }
    }
}

/// A utility-maximizing action of user `n` with others held fixed. Ties go
/// to the lowest `(location, channel)`.
pub fn best_response(s: &Scenario, prof: &Profile, n: usize, space: DeviationSpace) -> Action {
    let mut best: Option<(Action, f64)> = None;
    for_each_deviation(s, &prof.locations, &prof.channels, n, space, |action, u| {
        if best.map_or(true, |(_, bu)| strictly_better(u, bu)) {
            best = Some((action, u));
        }
    });
    best.expect("deviation space is never empty").0
}

fn has_improvement(s: &Scenario, locations: &[usize], channels: &[usize], n: usize, space: DeviationSpace) -> bool {
    let current = utility_at(s, locations, channels, n);
    let mut improves = false;
    for_each_deviation(s, locations, channels, n, space, |_, u| {
        improves |= strictly_better(u, current);
    });
    improves
}

/// `true` iff no user has a strictly improving unilateral deviation.
pub fn is_nash(s: &Scenario, prof: &Profile, space: DeviationSpace) -> bool {
    is_nash_at(s, &prof.locations, &prof.channels, space)
}

pub fn is_nash_at(s: &Scenario, locations: &[usize], channels: &[usize], space: DeviationSpace) -> bool {
    (0..channels.len()).all(|n| !has_improvement(s, locations, channels, n, space))
}

/// Order in which users get the chance to update in a better-response run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrder {
    RoundRobin,
    /// A fresh random permutation of users for every sweep.
    Shuffled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetterResponseRun {
    pub profile: Profile,
    pub steps: usize,
    /// Potential before the first and after every update.
    pub potentials: Vec<f64>,
}

/// Asynchronous better-response dynamics: one user at a time switches to a
/// uniformly chosen strictly improving action, until a full sweep finds no
/// improvement.
pub fn better_response_path<R: Rng + ?Sized>(
    s: &Scenario,
    start: &Profile,
    space: DeviationSpace,
    order: UpdateOrder,
    rng: &mut R,
) -> BetterResponseRun {
    let n_users = s.num_users();
    let mut prof = start.clone();
    let mut potentials = vec![potential(s, &prof)];
    let step_cap = profile_space_size(s, &prof, DeviationSpace::Joint);
    let mut users: Vec<usize> = (0..n_users).collect();
    let mut improving = Vec::new();
    loop {
        if order == UpdateOrder::Shuffled {
            users.shuffle(rng);
        }
        let mut moved = false;
        for &n in &users {
            let current = utility(s, &prof, n);
            improving.clear();
            for_each_deviation(s, &prof.locations, &prof.channels, n, space, |a, u| {
                if strictly_better(u, current) {
                    improving.push(a);
                }
            });
            if improving.is_empty() {
                continue;
            }
            let pick = improving[rng.random_range(0..improving.len())];
            prof = prof.with_action(n, pick);
            potentials.push(potential(s, &prof));
            moved = true;
            assert!(
                ((potentials.len() - 1) as u128) <= step_cap,
                "better-response path exceeded |Θ×Λ| = {step_cap} steps"
            );
        }
        if !moved {
            break;
        }
    }
    BetterResponseRun {
        steps: potentials.len() - 1,
        profile: prof,
        potentials,
    }
}

/// Per-user action lists spanned by a deviation space around `base`.
fn action_sets(s: &Scenario, base: &Profile, space: DeviationSpace) -> Vec<Vec<Action>> {
    (0..s.num_users())
        .map(|n| {
            let d = base.locations[n];
            let m = base.channels[n];
            match space {
                DeviationSpace::Channels => (0..s.num_channels())
                    .map(|c| Action {
                        location: d,
                        channel: c,
                    })
                    .collect(),
                DeviationSpace::Locations => s.users[n]
                    .allowed_locations
                    .iter()
                    .map(|&x| Action {
                        location: x,
                        channel: m,
                    })
                    .collect(),
                DeviationSpace::Joint => s.users[n]
                    .allowed_locations
                    .iter()
                    .flat_map(|&x| {
                        (0..s.num_channels()).map(move |c| Action {
                            location: x,
                            channel: c,
                        })
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Number of profiles in the product space (saturating).
pub fn profile_space_size(s: &Scenario, base: &Profile, space: DeviationSpace) -> u128 {
    action_sets(s, base, space)
        .iter()
        .fold(1u128, |acc, set| acc.saturating_mul(set.len() as u128))
}

/// Visits every profile of the product space spanned by `space` around
/// `base` (coordinates outside the space are taken from `base`), in
/// lexicographic order with user 0 most significant.
pub fn for_each_profile(
    s: &Scenario,
    base: &Profile,
    space: DeviationSpace,
    budget: u128,
    mut f: impl FnMut(&[usize], &[usize]),
) -> Result<()> {
    let sets = action_sets(s, base, space);
    let required = sets
        .iter()
        .fold(1u128, |acc, set| acc.saturating_mul(set.len() as u128));
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let n = sets.len();
    let mut digits = vec![0usize; n];
    let mut locations: Vec<usize> = sets.iter().map(|set| set[0].location).collect();
    let mut channels: Vec<usize> = sets.iter().map(|set| set[0].channel).collect();
    loop {
        f(&locations, &channels);
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < sets[k].len() {
                let a = sets[k][digits[k]];
                locations[k] = a.location;
                channels[k] = a.channel;
                break;
            }
            digits[k] = 0;
            let a = sets[k][0];
            locations[k] = a.location;
            channels[k] = a.channel;
        }
    }
}

/// All pure Nash equilibria of the game restricted to `space` around `base`.
pub fn enumerate_nash(s: &Scenario, base: &Profile, space: DeviationSpace, budget: u128) -> Result<Vec<Profile>> {
    let mut found = Vec::new();
    for_each_profile(s, base, space, budget, |d, a| {
        if is_nash_at(s, d, a, space) {
            found.push(Profile::new(d.to_vec(), a.to_vec()));
        }
    })?;
    Ok(found)
}

/// Exact maximizer of `Σ_n U_n` over the space; the first maximizer in
/// enumeration order wins ties.
pub fn centralized_optimum(
    s: &Scenario,
    base: &Profile,
    space: DeviationSpace,
    budget: u128,
) -> Result<(Profile, f64)> {
    argmax_over(s, base, space, budget, total_utility_at)
}

/// Exact maximizer of `Φ` over the space.
pub fn potential_maximizer(
    s: &Scenario,
    base: &Profile,
    space: DeviationSpace,
    budget: u128,
) -> Result<(Profile, f64)> {
    argmax_over(s, base, space, budget, potential_at)
}

fn argmax_over(
    s: &Scenario,
    base: &Profile,
    space: DeviationSpace,
    budget: u128,
    objective: fn(&Scenario, &[usize], &[usize]) -> f64,
) -> Result<(Profile, f64)> {
    let mut best: Option<(Profile, f64)> = None;
    for_each_profile(s, base, space, budget, |d, a| {
        let v = objective(s, d, a);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((Profile::new(d.to_vec(), a.to_vec()), v));
        }
    })?;
    Ok(best.expect("profile space is never empty"))
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::scenario::*;

    /// Homogeneous 2-user / 2-channel / 2-location instance with both
    /// locations inside interference range: θ = 0.5, B = 2, p = 0.5.
    pub fn uniqueness_instance() -> Scenario {
        let cfg = ScenarioConfig {
            range: 2.0,
            contention_bounds: [0.01, 0.99],
            channels: vec![ChannelConfig { epsilon: 0.2, xi: 0.2 }; 2],
            users: vec![
                UserConfig {
                    p: 0.5,
                    zeta: 1.0,
                    nu: 1.0,
                    travel_radius: 10.0,
                    timer_density: 1.0,
                    allowed_locations: None,
                    initial_location: None,
                };
                2
            ],
            locations: LocationConfig {
                coordinates: Some(vec![[0.0, 0.0], [1.0, 0.0]]),
                distances: None,
                scale: None,
            },
            rates: RateConfig {
                mode: RateMode::MeanExponential,
                means: None,
                base_means: Some(vec![vec![2.0, 2.0]; 2]),
                bandwidth_mhz: None,
                noise_dbm: None,
                mean_gain: None,
            },
            explicit_edges: None,
        };
        cfg.validate().unwrap()
    }
}
