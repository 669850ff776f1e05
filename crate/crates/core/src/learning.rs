//! Distributed learning for spatial channel selection.
//!
//! Time is split into decision periods of `K` slots. At the start of a
//! period every user draws a channel from its mixed strategy, keeps it for
//! the whole period, and contends on it slot by slot. At the end of the
//! period it turns the sample-mean throughput into a payoff estimate and
//! reinforces the perception of the channel it used:
//!
//! ```text
//! σ^n_m(T)   = Z^n_m(T) / Σ_i Z^n_i(T)
//! Z^n_m(T+1) = σ^n_m(T) + μ_T · U_n(T) · 1{a_n(T) = m}
//! ```
//!
//! The mean-field limit of these dynamics is the replicator ODE
//! `dσ^n_m/dT = σ^n_m (V^n_m(σ) - Σ_i σ^n_i V^n_i(σ))`, integrated here by
//! RK4. Its Lyapunov function is the expected potential `L(σ) = E[Φ | σ]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{self, Profile};
use crate::normalization::{UtilityNormalization, DEFAULT_FLOOR};
use crate::rng::{SeedRoot, Substream};
use crate::scenario::{sample_rate, step_channel_state, ChannelState, InterferenceGraph, Scenario};

/// Throughput floor (Mbps) applied before taking the log of an estimate.
pub const DEFAULT_Q_FLOOR: f64 = 1e-6;

/// Perception value at which a user counts as converged.
pub const CONVERGENCE_LEVEL: f64 = 0.99;

/// Default cap on `M^N` for exact expectation by enumeration.
pub const DEFAULT_ODE_BUDGET: u128 = 1_000_000;

/// Proportional map from positive perceptions to a probability vector.
pub fn mixed_strategy(perceptions: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = perceptions.iter().find(|&&z| !(z > 0.0) || !z.is_finite()) {
        return Err(Error::Domain(format!(
            "perception values must be positive and finite, got {bad}"
        )));
    }
    let total: f64 = perceptions.iter().sum();
    Ok(perceptions.iter().map(|z| z / total).collect())
}

/// Perceptions and the mixed strategies they induce, for every user.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub perceptions: Vec<Vec<f64>>,
    pub strategies: Vec<Vec<f64>>,
    /// Index of the current decision period, starting at 1.
    pub period: usize,
}

impl MixedState {
    /// Every perception starts at `1/M`.
    pub fn uniform(n_users: usize, n_channels: usize) -> Self {
        let z = vec![1.0 / n_channels as f64; n_channels];
        let sigma = vec![1.0 / n_channels as f64; n_channels];
        Self {
            perceptions: vec![z; n_users],
            strategies: vec![sigma; n_users],
            period: 1,
        }
    }

    /// Applies one perception update with step `mu` and returns the next
    /// state.
    pub fn update_perceptions(&self, estimate: &PeriodEstimate, mu: f64) -> Result<MixedState> {
        let mut perceptions = Vec::with_capacity(self.strategies.len());
        let mut strategies = Vec::with_capacity(self.strategies.len());
        for (n, sigma) in self.strategies.iter().enumerate() {
            let chosen = estimate.channels[n];
            let reinforcement = mu * estimate.payoffs[n];
            let z: Vec<f64> = sigma
                .iter()
                .enumerate()
                .map(|(m, &s)| if m == chosen { s + reinforcement } else { s })
                .collect();
            let next = mixed_strategy(&z)
                .map_err(|e| Error::Domain(format!("perception update for user {n} left the positive orthant: {e}")))?;
            perceptions.push(z);
            strategies.push(next);
        }
        Ok(MixedState {
            perceptions,
            strategies,
            period: self.period + 1,
        })
    }

    /// Per-user most likely channel (lowest index on ties).
    pub fn argmax_channels(&self) -> Vec<usize> {
        self.strategies
            .iter()
            .map(|sigma| {
                sigma
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                    )
                    .0
            })
            .collect()
    }

    pub fn is_converged(&self) -> bool {
        self.strategies
            .iter()
            .all(|sigma| sigma.iter().copied().fold(0.0, f64::max) >= CONVERGENCE_LEVEL)
    }
}

/// Smoothing factor schedule `μ_T = scale / T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub scale: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl StepSchedule {
    pub fn at(&self, period: usize) -> f64 {
        self.scale / period as f64
    }
}

/// Turns a period's sample-mean throughput into a positive payoff:
/// `normalize(ln(max(Q̂, q_floor)))`, clamped below at the normalization
/// floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimator {
    pub normalization: UtilityNormalization,
    pub q_floor: f64,
}

impl PayoffEstimator {
    pub fn estimate(&self, mean_throughput: f64) -> f64 {
        self.normalization.apply_clamped(mean_throughput.max(self.q_floor).ln())
    }
}

/// Outcome of one decision period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    pub channels: Vec<usize>,
    /// Normalized payoff estimates `U_n(T)`.
    pub payoffs: Vec<f64>,
    /// Sample-mean throughputs `Q̂_n`.
    pub throughputs: Vec<f64>,
    pub slots: usize,
}

/// Slot-level random-access simulator. Channel states persist across
/// periods and start from the stationary law.
pub struct SlotSimulator<'a> {
    scenario: &'a Scenario,
    states: Vec<ChannelState>,
    state_rng: ChaCha8Rng,
    contention_rng: ChaCha8Rng,
    rate_rng: ChaCha8Rng,
}

impl<'a> SlotSimulator<'a> {
    pub fn new(scenario: &'a Scenario, seed: SeedRoot) -> Self {
        let mut state_rng = seed.stream(Substream::ChannelStates);
        let states = scenario
            .channels
            .iter()
            .map(|c| c.sample_stationary(&mut state_rng))
            .collect();
        Self {
            scenario,
            states,
            state_rng,
            contention_rng: seed.stream(Substream::Contention),
            rate_rng: seed.stream(Substream::Rates),
        }
    }

    pub fn channel_states(&self) -> &[ChannelState] {
        &self.states
    }

    /// Runs `slots` slots with channels held fixed.
    ///
    /// In each slot all channel states advance first; a user on an idle
    /// channel contends with probability `p_n` and transmits at a freshly
    /// sampled rate iff no same-channel interfering neighbour also contends.
    pub fn simulate_period(
        &mut self,
        locations: &[usize],
        channels: &[usize],
        slots: usize,
        estimator: &PayoffEstimator,
    ) -> Result<PeriodEstimate> {
        let s = self.scenario;
        if slots == 0 {
            return Err(Error::Domain("a decision period needs at least one slot".into()));
        }
        let graph = InterferenceGraph::build(s, locations)?;
        let n_users = s.num_users();
        let rivals: Vec<Vec<usize>> = (0..n_users)
            .map(|n| {
                graph
                    .neighbors(n)
                    .iter()
                    .copied()
                    .filter(|&i| channels[i] == channels[n])
                    .collect()
            })
            .collect();
        let mut contends = vec![false; n_users];
        let mut totals = vec![0.0; n_users];
        for _ in 0..slots {
            for (state, spec) in self.states.iter_mut().zip(&s.channels) {
                *state = step_channel_state(*state, spec, &mut self.state_rng);
            }
            for n in 0..n_users {
                contends[n] = self.states[channels[n]].is_idle() && self.contention_rng.random::<f64>() < s.users[n].p;
            }
            for n in 0..n_users {
                if contends[n] && !rivals[n].iter().any(|&i| contends[i]) {
                    totals[n] += sample_rate(s, n, channels[n], locations[n], &mut self.rate_rng);
                }
            }
        }
        let throughputs: Vec<f64> = totals.iter().map(|t| t / slots as f64).collect();
        let payoffs = throughputs.iter().map(|&q| estimator.estimate(q)).collect();
        Ok(PeriodEstimate {
            channels: channels.to_vec(),
            payoffs,
            throughputs,
            slots,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningParams {
    pub slots_per_period: usize,
    pub periods: usize,
    pub step: StepSchedule,
    /// `None` selects the exact range at the run's location profile.
    pub normalization: Option<UtilityNormalization>,
    pub q_floor: f64,
    /// Keep every user's mixed strategy in the trace.
    pub record_strategies: bool,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self {
            slots_per_period: 100,
            periods: 300,
            step: StepSchedule::default(),
            normalization: None,
            q_floor: DEFAULT_Q_FLOOR,
            record_strategies: false,
        }
    }
}

/// One row of a learning trace.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRecord {
    pub period: usize,
    pub channels: Vec<usize>,
    pub payoffs: Vec<f64>,
    pub strategies: Option<Vec<Vec<f64>>>,
    /// Exact `Φ(d, a(T))` of the channels played this period.
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningOutcome {
    pub records: Vec<LearningRecord>,
    pub state: MixedState,
    /// Per-user argmax of the final mixed strategy, at the run's locations.
    pub final_profile: Profile,
    /// Every user's largest choice probability reached [`CONVERGENCE_LEVEL`].
    pub converged: bool,
    pub normalization: UtilityNormalization,
}

/// Runs the learning mechanism at fixed locations for `params.periods`
/// decision periods.
pub fn run_learning(
    s: &Scenario,
    locations: &[usize],
    params: &LearningParams,
    seed: SeedRoot,
) -> Result<LearningOutcome> {
    let normalization = match params.normalization {
        Some(n) => n,
        None => UtilityNormalization::exact_for_channels(s, locations, DEFAULT_FLOOR)?,
    };
    let estimator = PayoffEstimator {
        normalization,
        q_floor: params.q_floor,
    };
    let mut sim = SlotSimulator::new(s, seed);
    let mut choice_rng = seed.stream(Substream::ChannelChoice);
    let mut state = MixedState::uniform(s.num_users(), s.num_channels());
    let mut records = Vec::with_capacity(params.periods);
    for _ in 0..params.periods {
        let channels: Vec<usize> = state
            .strategies
            .iter()
            .map(|sigma| sample_index(sigma, &mut choice_rng))
            .collect();
        let estimate = sim.simulate_period(locations, &channels, params.slots_per_period, &estimator)?;
        let mu = params.step.at(state.period);
        let next = state.update_perceptions(&estimate, mu)?;
        records.push(LearningRecord {
            period: state.period,
            potential: game::potential_at(s, locations, &channels),
            channels,
            payoffs: estimate.payoffs,
            strategies: params.record_strategies.then(|| next.strategies.clone()),
        });
        state = next;
    }
    let final_profile = Profile::new(locations.to_vec(), state.argmax_channels());
    Ok(LearningOutcome {
        records,
        converged: state.is_converged(),
        final_profile,
        state,
        normalization,
    })
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// Mean dynamics
// ---------------------------------------------------------------------------

/// Expected raw payoffs `V^n_m(σ) = E[U_n | a_n = m, σ_{-n}]`. The utility
/// is additive over neighbours, so
/// `V^n_m = ln(θ_m B^n_{m,d_n} p_n) + Σ_{i ∈ N_n(d)} ln(1 - p_i) σ^i_m`.
pub fn expected_payoffs(s: &Scenario, locations: &[usize], sigma: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_users = s.num_users();
    (0..n_users)
        .map(|n| {
            (0..s.num_channels())
                .map(|m| {
                    let crowd: f64 = (0..n_users)
                        .filter(|&i| s.interferes(n, i, locations[n], locations[i]))
                        .map(|i| s.log_idle(i) * sigma[i][m])
                        .sum();
                    s.log_base(n, m, locations[n]) + crowd
                })
                .collect()
        })
        .collect()
}

/// [`expected_payoffs`] by explicit enumeration of every opponent channel
/// profile weighted by its probability.
pub fn expected_payoffs_enumerated(
    s: &Scenario,
    locations: &[usize],
    sigma: &[Vec<f64>],
    budget: u128,
) -> Result<Vec<Vec<f64>>> {
    let n_users = s.num_users();
    let n_ch = s.num_channels();
    let mut v = vec![vec![0.0; n_ch]; n_users];
    for_each_weighted_profile(s, locations, sigma, budget, |channels, prob| {
        // Contribution of this opponent profile to V^n_{a_n}: divide out
        // user n's own probability of playing a_n.
        for n in 0..n_users {
            let own = sigma[n][channels[n]];
            if own > 0.0 {
                v[n][channels[n]] += prob / own * game::utility_at(s, locations, channels, n);
            }
        }
    })?;
    // Channels a user never plays are not reached above; fill them by
    // enumerating with that user pinned.
    for n in 0..n_users {
        for m in 0..n_ch {
            if sigma[n][m] > 0.0 {
                continue;
            }
            let mut pinned = sigma.to_vec();
            pinned[n] = one_hot(n_ch, m);
            let mut acc = 0.0;
            for_each_weighted_profile(s, locations, &pinned, budget, |channels, prob| {
                acc += prob * game::utility_at(s, locations, channels, n);
            })?;
            v[n][m] = acc;
        }
    }
    Ok(v)
}

fn one_hot(len: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[k] = 1.0;
    v
}

fn for_each_weighted_profile(
    s: &Scenario,
    locations: &[usize],
    sigma: &[Vec<f64>],
    budget: u128,
    mut f: impl FnMut(&[usize], f64),
) -> Result<()> {
    let base = Profile::new(locations.to_vec(), vec![0; s.num_users()]);
    game::for_each_profile(s, &base, game::DeviationSpace::Channels, budget, |_, channels| {
        let prob: f64 = channels.iter().enumerate().map(|(n, &m)| sigma[n][m]).product();
        if prob > 0.0 {
            f(channels, prob);
        }
    })
}

/// Expected potential under a mixed profile, with the per-user conditional
/// table `L^n_i = E[Φ | σ, a_n = i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedPotential {
    pub value: f64,
    pub conditional: Vec<Vec<f64>>,
}

/// `L(σ)` and `L^n_i(σ)` by explicit enumeration over `M^N` channel
/// profiles.
pub fn expected_potential(
    s: &Scenario,
    locations: &[usize],
    sigma: &[Vec<f64>],
    budget: u128,
) -> Result<ExpectedPotential> {
    let n_users = s.num_users();
    let n_ch = s.num_channels();
    let mut value = 0.0;
    for_each_weighted_profile(s, locations, sigma, budget, |channels, prob| {
        value += prob * game::potential_at(s, locations, channels);
    })?;
    let mut conditional = vec![vec![0.0; n_ch]; n_users];
    for n in 0..n_users {
        for m in 0..n_ch {
            let mut pinned = sigma.to_vec();
            pinned[n] = one_hot(n_ch, m);
            let mut acc = 0.0;
            for_each_weighted_profile(s, locations, &pinned, budget, |channels, prob| {
                acc += prob * game::potential_at(s, locations, channels);
            })?;
            conditional[n][m] = acc;
        }
    }
    Ok(ExpectedPotential { value, conditional })
}

/// `L(σ)` in closed form: `Φ` is a sum of single-user and pairwise terms,
/// and distinct users draw channels independently.
pub fn expected_potential_value(s: &Scenario, locations: &[usize], sigma: &[Vec<f64>]) -> f64 {
    let n_users = s.num_users();
    let mut value = 0.0;
    for i in 0..n_users {
        let own: f64 = sigma[i]
            .iter()
            .enumerate()
            .map(|(m, &p)| p * s.log_base(i, m, locations[i]))
            .sum();
        let mut pair = 0.0;
        for j in 0..n_users {
            if s.interferes(i, j, locations[i], locations[j]) {
                let collide: f64 = sigma[i].iter().zip(&sigma[j]).map(|(a, b)| a * b).sum();
                pair += s.log_idle(j) * collide;
            }
        }
        value += s.weight(i) * (0.5 * pair + own);
    }
    value
}

/// Closed-form counterpart of [`expected_potential`].
pub fn expected_potential_closed_form(s: &Scenario, locations: &[usize], sigma: &[Vec<f64>]) -> ExpectedPotential {
    let n_ch = s.num_channels();
    let mut pinned = sigma.to_vec();
    let conditional = (0..s.num_users())
        .map(|n| {
            let row = (0..n_ch)
                .map(|m| {
                    pinned[n] = one_hot(n_ch, m);
                    expected_potential_value(s, locations, &pinned)
                })
                .collect();
            pinned[n] = sigma[n].clone();
            row
        })
        .collect();
    ExpectedPotential {
        value: expected_potential_value(s, locations, sigma),
        conditional,
    }
}

/// Right-hand side of the replicator ODE.
pub fn replicator_field(s: &Scenario, locations: &[usize], sigma: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let v = expected_payoffs(s, locations, sigma);
    sigma
        .iter()
        .zip(&v)
        .map(|(sig, val)| {
            let mean: f64 = sig.iter().zip(val).map(|(a, b)| a * b).sum();
            sig.iter().zip(val).map(|(a, b)| a * (b - mean)).collect()
        })
        .collect()
}

/// A point on the replicator trajectory with its exact payoffs and
/// expected potential.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub sigma: Vec<Vec<f64>>,
    pub payoffs: Vec<Vec<f64>>,
    pub potential: f64,
}

impl OdeState {
    pub fn new(s: &Scenario, locations: &[usize], sigma: Vec<Vec<f64>>) -> Self {
        Self {
            payoffs: expected_payoffs(s, locations, &sigma),
            potential: expected_potential_value(s, locations, &sigma),
            sigma,
        }
    }
}

/// Default RK4 step size.
pub const DEFAULT_ODE_STEP: f64 = 0.01;

/// One RK4 step of the replicator ODE followed by projection back onto
/// the simplices (clip at zero, renormalize).
pub fn replicator_ode_step(state: &OdeState, s: &Scenario, locations: &[usize], h: f64) -> Result<OdeState> {
    let required = (s.num_channels() as u128).saturating_pow(s.num_users() as u32);
    if required > DEFAULT_ODE_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            budget: DEFAULT_ODE_BUDGET,
        });
    }
    Ok(OdeState::new(s, locations, rk4_step(s, locations, &state.sigma, h)))
}

pub(crate) fn rk4_step(s: &Scenario, locations: &[usize], sigma: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let axpy = |x: &[Vec<f64>], k: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> {
        x.iter()
            .zip(k)
            .map(|(xr, kr)| xr.iter().zip(kr).map(|(a, b)| a + c * b).collect())
            .collect()
    };
    let k1 = replicator_field(s, locations, sigma);
    let k2 = replicator_field(s, locations, &axpy(sigma, &k1, h / 2.0));
    let k3 = replicator_field(s, locations, &axpy(sigma, &k2, h / 2.0));
    let k4 = replicator_field(s, locations, &axpy(sigma, &k3, h));
    sigma
        .iter()
        .enumerate()
        .map(|(n, row)| {
            let mut next: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(m, &x)| (x + h / 6.0 * (k1[n][m] + 2.0 * k2[n][m] + 2.0 * k3[n][m] + k4[n][m])).max(0.0))
                .collect();
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= total);
            next
        })
        .collect()
}

/// Integrates `steps` RK4 steps, returning every visited state including
/// the initial one.
pub fn replicator_trajectory(
    s: &Scenario,
    locations: &[usize],
    sigma0: Vec<Vec<f64>>,
    h: f64,
    steps: usize,
) -> Result<Vec<OdeState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(OdeState::new(s, locations, sigma0));
    for _ in 0..steps {
        let next = replicator_ode_step(out.last().unwrap(), s, locations, h)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::testing::uniqueness_instance;
    use crate::game::{DeviationSpace, DEFAULT_BUDGET};
    use crate::scenario::testing::{line_config, line_scenario};
    use crate::scenario::{RateMode, ScenarioConfig};
    use rand::SeedableRng;

    fn random_simplex<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
                let t: f64 = raw.iter().sum();
                raw.iter().map(|x| x / t).collect()
            })
            .collect()
    }

    fn mixed_instance() -> Scenario {
        let users = vec![
            (0.3, vec![1.0, 2.0, 0.5]),
            (0.6, vec![3.0, 0.2, 1.0]),
            (0.15, vec![0.7, 0.7, 4.0]),
            (0.8, vec![1.5, 1.0, 2.5]),
        ];
        line_scenario(1.5, &[0.5, 0.9, 0.3], &users, &[0.0, 1.0, 2.0, 3.5])
    }

    #[test]
    fn mixed_strategy_examples() {
        assert_eq!(mixed_strategy(&[0.2; 5]).unwrap(), vec![0.2; 5]);
        assert_eq!(mixed_strategy(&[2.0, 1.0, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
        let a = mixed_strategy(&[0.3, 1.7, 2.2]).unwrap();
        let b = mixed_strategy(&[0.3 * 7.5, 1.7 * 7.5, 2.2 * 7.5]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(mixed_strategy(&[1.0, 0.0]).is_err());
        assert!(mixed_strategy(&[1.0, -0.5]).is_err());
    }

    #[test]
    fn zero_payoff_update_only_renormalizes() {
        let mut state = MixedState::uniform(1, 3);
        state.perceptions = vec![vec![2.0, 1.0, 1.0]];
        state.strategies = vec![mixed_strategy(&state.perceptions[0]).unwrap()];
        let est = PeriodEstimate {
            channels: vec![1],
            payoffs: vec![0.0],
            throughputs: vec![0.0],
            slots: 1,
        };
        let next = state.update_perceptions(&est, 0.5).unwrap();
        assert_eq!(next.perceptions[0], state.strategies[0]);
        assert_eq!(next.strategies[0], state.strategies[0]);
    }

    #[test]
    fn update_matches_discrete_dynamics_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let n_ch = rng.random_range(2..6);
            let sigma = random_simplex(&mut rng, 1, n_ch).remove(0);
            let state = MixedState {
                perceptions: vec![sigma.clone()],
                strategies: vec![sigma.clone()],
                period: 3,
            };
            let chosen = rng.random_range(0..n_ch);
            let u: f64 = rng.random_range(0.05..1.0);
            let mu: f64 = rng.random_range(0.01..1.0);
            let est = PeriodEstimate {
                channels: vec![chosen],
                payoffs: vec![u],
                throughputs: vec![1.0],
                slots: 1,
            };
            let next = state.update_perceptions(&est, mu).unwrap();
            for m in 0..n_ch {
                let ind = if m == chosen { 1.0 } else { 0.0 };
                let closed = sigma[m] + mu * u * (ind - sigma[m]) / (1.0 + mu * u);
                assert!((next.strategies[0][m] - closed).abs() < 1e-12);
            }
            assert!(next.strategies[0][chosen] > sigma[chosen]);
            assert!((next.strategies[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn two_user_slot_config(p: f64, mode: RateMode, theta_one: bool) -> ScenarioConfig {
        let users = vec![(p, vec![3.0]), (p, vec![3.0])];
        let mut cfg = line_config(1.0, &[if theta_one { 1.0 } else { 0.5 }], &users, &[0.0, 0.5]);
        cfg.rates.mode = mode;
        cfg
    }

    #[test]
    fn certain_collision_yields_floor_payoff() {
        let s = two_user_slot_config(1.0, RateMode::MeanExponential, false)
            .build_unchecked()
            .unwrap();
        let norm = UtilityNormalization::new(-5.0, 2.0, DEFAULT_FLOOR).unwrap();
        let est = PayoffEstimator {
            normalization: norm,
            q_floor: DEFAULT_Q_FLOOR,
        };
        let mut sim = SlotSimulator::new(&s, SeedRoot(1));
        let out = sim.simulate_period(&[0, 1], &[0, 0], 500, &est).unwrap();
        assert_eq!(out.throughputs, vec![0.0, 0.0]);
        assert_eq!(out.payoffs, vec![DEFAULT_FLOOR, DEFAULT_FLOOR]);
    }

    #[test]
    fn lone_user_with_certain_access_gets_its_rate() {
        let mut cfg = two_user_slot_config(1.0, RateMode::Constant, true);
        cfg.users.truncate(1);
        cfg.rates.base_means = Some(vec![vec![3.0]]);
        let s = cfg.build_unchecked().unwrap();
        let norm = UtilityNormalization::new(-5.0, 2.0, DEFAULT_FLOOR).unwrap();
        let est = PayoffEstimator {
            normalization: norm,
            q_floor: DEFAULT_Q_FLOOR,
        };
        let mut sim = SlotSimulator::new(&s, SeedRoot(1));
        let out = sim.simulate_period(&[0], &[0], 1000, &est).unwrap();
        assert_eq!(out.throughputs, vec![3.0]);
    }

    #[test]
    fn slot_throughput_is_unbiased() {
        // Batch means over 100 periods of 1000 slots; 3 sigma per user.
        let s = mixed_instance();
        let locations = [0, 1, 2, 3];
        let channels = [1, 1, 2, 1];
        let prof = Profile::new(locations.to_vec(), channels.to_vec());
        let norm = UtilityNormalization::exact_for_channels(&s, &locations, DEFAULT_FLOOR).unwrap();
        let est = PayoffEstimator {
            normalization: norm,
            q_floor: DEFAULT_Q_FLOOR,
        };
        let mut sim = SlotSimulator::new(&s, SeedRoot(42));
        let batches: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                sim.simulate_period(&locations, &channels, 1000, &est)
                    .unwrap()
                    .throughputs
            })
            .collect();
        for n in 0..4 {
            let xs: Vec<f64> = batches.iter().map(|b| b[n]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            let se = (var / xs.len() as f64).sqrt();
            let exact = game::expected_throughput(&s, &prof, n);
            assert!(
                (mean - exact).abs() <= 3.0 * se,
                "user {n}: {mean} vs {exact} (se {se})"
            );
        }
    }

    fn single_user_five_channels() -> Scenario {
        line_scenario(1.0, &[0.5; 5], &[(0.5, vec![0.1, 0.3, 0.8, 1.0, 1.5])], &[0.0])
    }

    #[test]
    fn single_user_mean_dynamics_concentrate_on_the_best_channel() {
        let s = single_user_five_channels();
        let best = game::best_response(&s, &Profile::new(vec![0], vec![0]), 0, DeviationSpace::Channels);
        let path = replicator_trajectory(&s, &[0], vec![vec![0.2; 5]], DEFAULT_ODE_STEP, 3000).unwrap();
        let last = &path.last().unwrap().sigma[0];
        assert!(last[best.channel] >= 0.99, "{last:?}");
    }

    #[test]
    fn single_user_learning_drifts_towards_the_best_channel() {
        let s = single_user_five_channels();
        let best = game::best_response(&s, &Profile::new(vec![0], vec![0]), 0, DeviationSpace::Channels).channel;
        let params = LearningParams {
            periods: 300,
            ..LearningParams::default()
        };
        let mut mean = vec![0.0; 5];
        for seed in 0..40 {
            let out = run_learning(&s, &[0], &params, SeedRoot(seed)).unwrap();
            for (acc, x) in mean.iter_mut().zip(&out.state.strategies[0]) {
                *acc += x / 40.0;
            }
        }
        assert!(mean[best] > 0.2, "{mean:?}");
        assert!((0..5).filter(|&m| m != best).all(|m| mean[m] < mean[best]), "{mean:?}");
    }

    #[test]
    fn learning_is_deterministic_per_seed() {
        let s = mixed_instance();
        let params = LearningParams {
            periods: 40,
            record_strategies: true,
            ..LearningParams::default()
        };
        let a = run_learning(&s, &[0, 1, 2, 3], &params, SeedRoot(5)).unwrap();
        let b = run_learning(&s, &[0, 1, 2, 3], &params, SeedRoot(5)).unwrap();
        assert_eq!(a, b);
        for rec in &a.records {
            for sigma in rec.strategies.as_ref().unwrap() {
                assert!((sigma.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(sigma.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn closed_forms_match_enumeration() {
        let s = mixed_instance();
        let locations = [0, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let mut sigma = random_simplex(&mut rng, 4, 3);
            // exercise the zero-probability path too
            sigma[1] = vec![0.0, 0.4, 0.6];
            let v = expected_payoffs(&s, &locations, &sigma);
            let v_enum = expected_payoffs_enumerated(&s, &locations, &sigma, DEFAULT_BUDGET).unwrap();
            let l = expected_potential_closed_form(&s, &locations, &sigma);
            let l_enum = expected_potential(&s, &locations, &sigma, DEFAULT_BUDGET).unwrap();
            assert!((l.value - l_enum.value).abs() < 1e-10);
            for n in 0..4 {
                for m in 0..3 {
                    assert!((v[n][m] - v_enum[n][m]).abs() < 1e-10);
                    assert!((l.conditional[n][m] - l_enum.conditional[n][m]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn expected_potential_of_a_point_mass_is_the_potential() {
        let s = mixed_instance();
        let locations = [0, 1, 2, 3];
        let channels = [2, 0, 1, 1];
        let sigma: Vec<Vec<f64>> = channels.iter().map(|&m| one_hot(3, m)).collect();
        let l = expected_potential(&s, &locations, &sigma, DEFAULT_BUDGET).unwrap();
        let phi = game::potential_at(&s, &locations, &channels);
        assert!((l.value - phi).abs() < 1e-12);
    }

    #[test]
    fn vertices_are_fixed_points() {
        let s = mixed_instance();
        let sigma: Vec<Vec<f64>> = [0, 2, 1, 1].iter().map(|&m| one_hot(3, m)).collect();
        for row in replicator_field(&s, &[0, 1, 2, 3], &sigma) {
            assert!(row.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn symmetric_mixed_point_of_uniqueness_instance_is_stationary() {
        let s = uniqueness_instance();
        let sigma = vec![vec![0.5, 0.5]; 2];
        let v = expected_payoffs_enumerated(&s, &[0, 1], &sigma, DEFAULT_BUDGET).unwrap();
        for row in &v {
            assert!((row[0] - row[1]).abs() < 1e-15);
        }
        for row in replicator_field(&s, &[0, 1], &sigma) {
            assert!(row.iter().all(|&x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn rk4_step_size_is_converged() {
        // Richardson-style comparison of h and h/2 over T = 1.
        let s = mixed_instance();
        let locations = [0, 1, 2, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sigma0 = random_simplex(&mut rng, 4, 3);
        let coarse = replicator_trajectory(&s, &locations, sigma0.clone(), 0.01, 100).unwrap();
        let fine = replicator_trajectory(&s, &locations, sigma0, 0.005, 200).unwrap();
        let (a, b) = (&coarse.last().unwrap().sigma, &fine.last().unwrap().sigma);
        for (ra, rb) in a.iter().zip(b) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() <= 1e-6 * y.abs().max(1e-3), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn ode_budget_is_enforced() {
        let users: Vec<(f64, Vec<f64>)> = (0..9).map(|_| (0.3, vec![1.0; 5])).collect();
        let s = line_scenario(1.0, &[0.5; 5], &users, &[0.0]);
        let state = OdeState::new(&s, &[0; 9], vec![vec![0.2; 5]; 9]);
        assert!(matches!(
            replicator_ode_step(&state, &s, &[0; 9], 0.01),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
