//! Strategic mobility as a continuous-time Markov chain over location
//! profiles.
//!
//! Each user with a nonempty feasible set `△^n_{d_n}` runs a countdown timer
//! with mean `1/(τ_n |△^n_{d_n}|)`. When it expires the user evaluates a
//! uniformly chosen candidate `d′_n` and moves there with the logistic
//! probability
//!
//! ```text
//! e^{w_n γ U_n(d′, a)} / (e^{w_n γ U_n(d, a)} + e^{w_n γ U_n(d′, a)}),   w_n = -ln(1 - p_n)
//! ```
//!
//! With exponential timers the chain is reversible with Gibbs stationary law
//! `Pr(d) ∝ e^{γ Φ(d, a)}`. The joint algorithm runs the same chain with
//! channels re-optimized at every location profile.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{self, DeviationSpace, Profile, DEFAULT_BUDGET};
use crate::learning::{run_learning, LearningParams};
use crate::rng::{SeedRoot, Substream};
use crate::scenario::Scenario;

/// Waiting-time law of the location-update timers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TimerDistribution {
    Exponential,
    /// Uniform on `[0, 2·mean]`.
    Uniform,
    /// Pareto on `[scale, ∞)` with the given shape, which must exceed 1.
    Pareto {
        shape: f64,
    },
}

pub const DEFAULT_PARETO_SHAPE: f64 = 2.5;

impl TimerDistribution {
    pub fn pareto() -> Self {
        TimerDistribution::Pareto {
            shape: DEFAULT_PARETO_SHAPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TimerDistribution::Pareto { shape } if !(shape > 1.0 && shape.is_finite()) => Err(Error::validation(
                "timer_distribution.shape",
                format!("Pareto shape must exceed 1 for a finite mean, got {shape}"),
            )),
            _ => Ok(()),
        }
    }

    /// Draws one waiting time with the requested mean.
    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match *self {
            TimerDistribution::Exponential => Exp::new(1.0 / mean).expect("positive rate").sample(rng),
            TimerDistribution::Uniform => rng.random_range(0.0..2.0 * mean),
            TimerDistribution::Pareto { shape } => {
                let scale = mean * (shape - 1.0) / shape;
                Pareto::new(scale, shape).expect("valid Pareto").sample(rng)
            }
        }
    }
}

/// How the joint algorithm picks channels at a location profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelOracle {
    /// `a*_d = argmax_a Φ(d, a)` by enumeration.
    ExactArgmax,
    /// A fresh learning run at `d`.
    Learning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub gamma: f64,
    pub timer: TimerDistribution,
    /// Virtual-time horizon.
    pub horizon: f64,
    pub channel_oracle: ChannelOracle,
    /// Learning settings for [`ChannelOracle::Learning`].
    pub learning: LearningParams,
    /// Enumeration budget for exact channel optimization.
    pub budget: u128,
    /// Keep one trace row per timer expiry.
    pub record_events: bool,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            timer: TimerDistribution::Exponential,
            horizon: 1000.0,
            channel_oracle: ChannelOracle::ExactArgmax,
            learning: LearningParams::default(),
            budget: DEFAULT_BUDGET,
            record_events: true,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::validation(
                "gamma",
                format!("must be finite and nonnegative, got {}", self.gamma),
            ));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::validation(
                "horizon",
                format!("must be finite and nonnegative, got {}", self.horizon),
            ));
        }
        self.timer.validate()
    }
}

/// Logistic acceptance probability of a proposed move, computed stably.
pub fn acceptance_probability(u_old: f64, u_new: f64, p: f64, gamma: f64) -> f64 {
    let x = -(1.0 - p).ln() * gamma * (u_new - u_old);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Off-diagonal generator entry `q_{d,d′}` at fixed channels `a`.
pub fn transition_rate(s: &Scenario, d: &[usize], d_prime: &[usize], a: &[usize], gamma: f64) -> Result<f64> {
    let differing: Vec<usize> = (0..d.len()).filter(|&i| d[i] != d_prime[i]).collect();
    match differing.as_slice() {
        [] => Ok(0.0),
        &[n] => {
            if !s.feasible_moves(n, d[n]).contains(&d_prime[n]) {
                return Ok(0.0);
            }
            let u_old = game::utility_at(s, d, a, n);
            let u_new = game::utility_at(s, d_prime, a, n);
            Ok(s.users[n].timer_density * acceptance_probability(u_old, u_new, s.users[n].p, gamma))
        }
        _ => Err(Error::Domain(format!(
            "transition rates are defined between profiles differing in one user, these differ in {}",
            differing.len()
        ))),
    }
}

/// A probability law over enumerated location profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub states: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
}

impl StateDistribution {
    pub fn probability_of(&self, d: &[usize]) -> f64 {
        self.states
            .iter()
            .position(|x| x == d)
            .map_or(0.0, |i| self.probabilities[i])
    }

    /// Total variation distance to an occupancy map (missing keys count as
    /// zero mass).
    pub fn total_variation(&self, other: &BTreeMap<Vec<usize>, f64>) -> f64 {
        let mut tv = 0.0;
        for (d, &p) in self.states.iter().zip(&self.probabilities) {
            tv += (p - other.get(d).copied().unwrap_or(0.0)).abs();
        }
        for (d, &q) in other {
            if !self.states.contains(d) {
                tv += q;
            }
        }
        0.5 * tv
    }

    /// Probability mass on a set of states.
    pub fn mass_on(&self, set: &[Vec<usize>]) -> f64 {
        self.states
            .iter()
            .zip(&self.probabilities)
            .filter(|(d, _)| set.contains(d))
            .map(|(_, p)| p)
            .sum()
    }
}

fn gibbs_from_energies(states: Vec<Vec<usize>>, energies: &[f64], gamma: f64) -> StateDistribution {
    let top = energies.iter().map(|e| gamma * e).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = energies.iter().map(|e| (gamma * e - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    StateDistribution {
        states,
        probabilities: weights.iter().map(|w| w / total).collect(),
    }
}

/// `Pr(d) = e^{γΦ(d,a)} / Σ_d̃ e^{γΦ(d̃,a)}` over all location profiles.
pub fn gibbs_distribution(s: &Scenario, a: &[usize], gamma: f64, budget: u128) -> Result<StateDistribution> {
    let base = Profile::new(s.initial_locations(), a.to_vec());
    let mut states = Vec::new();
    let mut energies = Vec::new();
    game::for_each_profile(s, &base, DeviationSpace::Locations, budget, |d, a| {
        states.push(d.to_vec());
        energies.push(game::potential_at(s, d, a));
    })?;
    Ok(gibbs_from_energies(states, &energies, gamma))
}

/// Gibbs law of the joint algorithm, `Pr(d) ∝ e^{γΦ(d, a*_d)}`.
pub fn joint_gibbs_distribution(s: &Scenario, gamma: f64, budget: u128) -> Result<StateDistribution> {
    let mut oracle = ExactChannels::new(budget);
    let states = location_profiles(s, budget)?;
    let energies = states
        .iter()
        .map(|d| oracle.get(s, d).map(|(_, phi)| phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(gibbs_from_energies(states, &energies, gamma))
}

/// Every location profile in `Θ`, user 0 most significant.
pub fn location_profiles(s: &Scenario, budget: u128) -> Result<Vec<Vec<usize>>> {
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    let mut states = Vec::new();
    game::for_each_profile(s, &base, DeviationSpace::Locations, budget, |d, _| {
        states.push(d.to_vec())
    })?;
    Ok(states)
}

/// Profiles reachable from `start` through single-user feasible moves.
pub fn reachable_profiles(s: &Scenario, start: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut stack = vec![start.to_vec()];
    seen.insert(start.to_vec());
    while let Some(d) = stack.pop() {
        for n in 0..d.len() {
            for x in s.feasible_moves(n, d[n]) {
                let mut next = d.clone();
                next[n] = x;
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
    }
    seen.into_iter().collect()
}

/// Memoized `a*_d = argmax_a Φ(d, a)`.
pub struct ExactChannels {
    budget: u128,
    cache: HashMap<Vec<usize>, (Vec<usize>, f64)>,
}

impl ExactChannels {
    pub fn new(budget: u128) -> Self {
        Self {
            budget,
            cache: HashMap::new(),
        }
    }

    /// Returns `(a*_d, Φ(d, a*_d))`.
    pub fn get(&mut self, s: &Scenario, d: &[usize]) -> Result<(Vec<usize>, f64)> {
        if let Some(hit) = self.cache.get(d) {
            return Ok(hit.clone());
        }
        let base = Profile::new(d.to_vec(), vec![0; s.num_users()]);
        let (best, phi) = game::potential_maximizer(s, &base, DeviationSpace::Channels, self.budget)?;
        self.cache.insert(d.to_vec(), (best.channels.clone(), phi));
        Ok((best.channels, phi))
    }
}

/// Stable 64-bit FNV-1a digest of a channel profile.
pub fn channel_profile_hash(channels: &[usize]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &c in channels {
        for b in (c as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// One timer expiry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MobilityEvent {
    pub time: f64,
    pub user: usize,
    pub from: usize,
    pub to: usize,
    pub accepted: bool,
    /// Potential and total utility after the event.
    pub phi: f64,
    pub total_utility: f64,
    pub channel_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    pub initial: Profile,
    pub events: Vec<MobilityEvent>,
    pub event_count: usize,
    pub accepted_count: usize,
    /// Time-weighted occupancy of location profiles, summing to 1 when the
    /// horizon is positive.
    pub occupancy: BTreeMap<Vec<usize>, f64>,
    /// Occupancy restricted to the second half of the horizon.
    pub late_occupancy: BTreeMap<Vec<usize>, f64>,
    pub time_average_utility: f64,
    pub time_average_potential: f64,
    pub final_profile: Profile,
    pub horizon: f64,
}

impl MobilityTrace {
    /// Most occupied state over the second half of the horizon (first in
    /// lexicographic order on ties).
    pub fn late_modal_state(&self) -> Vec<usize> {
        modal(&self.late_occupancy).unwrap_or_else(|| self.final_profile.locations.clone())
    }

    pub fn modal_state(&self) -> Vec<usize> {
        modal(&self.occupancy).unwrap_or_else(|| self.final_profile.locations.clone())
    }
}

fn modal(occ: &BTreeMap<Vec<usize>, f64>) -> Option<Vec<usize>> {
    occ.iter()
        .fold(None, |best: Option<(&Vec<usize>, f64)>, (d, &t)| match best {
            Some((_, bt)) if bt >= t => best,
            _ => Some((d, t)),
        })
        .map(|(d, _)| d.clone())
}

enum Channels<'a> {
    Fixed(&'a [usize]),
    Exact(ExactChannels),
    Learned {
        params: &'a LearningParams,
        seed: SeedRoot,
        runs: u64,
    },
}

impl Channels<'_> {
    fn at(&mut self, s: &Scenario, d: &[usize]) -> Result<Vec<usize>> {
        match self {
            Channels::Fixed(a) => Ok(a.to_vec()),
            Channels::Exact(oracle) => oracle.get(s, d).map(|(a, _)| a),
            Channels::Learned { params, seed, runs } => {
                let out = run_learning(s, d, params, seed.child(*runs))?;
                *runs += 1;
                Ok(out.final_profile.channels)
            }
        }
    }
}

/// Runs the location-update chain with channels fixed at `a`, starting from
/// the scenario's initial locations.
pub fn run_mobility(s: &Scenario, a: &[usize], params: &MobilityParams, seed: SeedRoot) -> Result<MobilityTrace> {
    params.validate()?;
    let start = Profile::new(s.initial_locations(), a.to_vec());
    start.validate(s)?;
    simulate(s, start.locations, Channels::Fixed(a), params, seed)
}

/// Runs the joint algorithm: the location chain with channels supplied by
/// the configured oracle at every visited profile.
pub fn run_joint(s: &Scenario, params: &MobilityParams, seed: SeedRoot) -> Result<MobilityTrace> {
    params.validate()?;
    let oracle = match params.channel_oracle {
        ChannelOracle::ExactArgmax => Channels::Exact(ExactChannels::new(params.budget)),
        ChannelOracle::Learning => Channels::Learned {
            params: &params.learning,
            seed,
            runs: 0,
        },
    };
    simulate(s, s.initial_locations(), oracle, params, seed)
}

fn simulate(
    s: &Scenario,
    start: Vec<usize>,
    mut oracle: Channels<'_>,
    params: &MobilityParams,
    seed: SeedRoot,
) -> Result<MobilityTrace> {
    let n_users = s.num_users();
    let mut timer_rng = seed.stream(Substream::Timers);
    let mut candidate_rng = seed.stream(Substream::CandidateSelection);
    let mut accept_rng = seed.stream(Substream::Acceptance);

    let mut d = start;
    let mut a = oracle.at(s, &d)?;
    let initial = Profile::new(d.clone(), a.clone());
    let mut phi = game::potential_at(s, &d, &a);
    let mut total = game::total_utility_at(s, &d, &a);

    let mut moves: Vec<Vec<usize>> = (0..n_users).map(|n| s.feasible_moves(n, d[n])).collect();
    let draw = |n: usize, k: usize, rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        if k == 0 {
            f64::INFINITY
        } else {
            params.timer.sample(1.0 / (s.users[n].timer_density * k as f64), rng)
        }
    };
    let mut next: Vec<f64> = (0..n_users).map(|n| draw(n, moves[n].len(), &mut timer_rng)).collect();

    let half = 0.5 * params.horizon;
    let mut occupancy: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut late: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut utility_area = 0.0;
    let mut potential_area = 0.0;
    let mut events = Vec::new();
    let (mut event_count, mut accepted_count) = (0usize, 0usize);
    let mut clock = 0.0;

    let mut hold = |d: &[usize], from: f64, to: f64, phi: f64, total: f64| {
        if to <= from {
            return;
        }
        *occupancy.entry(d.to_vec()).or_insert(0.0) += to - from;
        let late_span = to - from.max(half);
        if late_span > 0.0 {
            *late.entry(d.to_vec()).or_insert(0.0) += late_span;
        }
        utility_area += total * (to - from);
        potential_area += phi * (to - from);
    };

    loop {
        // Earliest pending timer, lowest user index on ties.
        let (n, t) = next
            .iter()
            .copied()
            .enumerate()
            .fold(
                (usize::MAX, f64::INFINITY),
                |(bn, bt), (i, ti)| if ti < bt { (i, ti) } else { (bn, bt) },
            );
        if n == usize::MAX || t > params.horizon {
            break;
        }
        hold(&d, clock, t, phi, total);
        clock = t;

        let from = d[n];
        let to = moves[n][candidate_rng.random_range(0..moves[n].len())];
        let mut d_new = d.clone();
        d_new[n] = to;
        let a_new = match &oracle {
            Channels::Fixed(_) => a.clone(),
            _ => oracle.at(s, &d_new)?,
        };
        let u_old = game::utility_at(s, &d, &a, n);
        let u_new = game::utility_at(s, &d_new, &a_new, n);
        let accepted = accept_rng.random::<f64>() < acceptance_probability(u_old, u_new, s.users[n].p, params.gamma);
        if accepted {
            d = d_new;
            a = a_new;
            phi = game::potential_at(s, &d, &a);
            total = game::total_utility_at(s, &d, &a);
            moves[n] = s.feasible_moves(n, d[n]);
            accepted_count += 1;
        }
        next[n] = t + draw(n, moves[n].len(), &mut timer_rng);
        event_count += 1;
        if params.record_events {
            events.push(MobilityEvent {
                time: t,
                user: n,
                from,
                to,
                accepted,
                phi,
                total_utility: total,
                channel_hash: channel_profile_hash(&a),
            });
        }
    }
    hold(&d, clock, params.horizon, phi, total);

    let normalize = |m: &mut BTreeMap<Vec<usize>, f64>| {
        let sum: f64 = m.values().sum();
        if sum > 0.0 {
            m.values_mut().for_each(|v| *v /= sum);
        }
    };
    normalize(&mut occupancy);
    normalize(&mut late);
    let (time_average_utility, time_average_potential) = if params.horizon > 0.0 {
        (utility_area / params.horizon, potential_area / params.horizon)
    } else {
        (total, phi)
    };
    Ok(MobilityTrace {
        initial,
        events,
        event_count,
        accepted_count,
        occupancy,
        late_occupancy: late,
        time_average_utility,
        time_average_potential,
        final_profile: Profile::new(d, a),
        horizon: params.horizon,
    })
}
