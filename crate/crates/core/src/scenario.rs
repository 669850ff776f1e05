//! The world model: primary channels, secondary users, the finite location
//! space, mean data rates, and the interference graph a location profile
//! induces.
//!
//! A [`Scenario`] is built from a [`ScenarioConfig`] (the on-disk TOML
//! schema) and is immutable afterwards. Expensive derived quantities, such
//! as the table of `ln(θ_m · B^n_{m,d} · p_n)` terms every utility
//! evaluation needs, are precomputed at load.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Occupancy of a primary channel in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelState {
    /// Occupied by primary transmissions (state 0).
    Busy,
    /// Available to secondary users (state 1).
    Idle,
}

impl ChannelState {
    pub fn is_idle(self) -> bool {
        self == ChannelState::Idle
    }
}

/// Long-run probability that a two-state channel is idle, `ε / (ε + ξ)`.
pub fn stationary_availability(epsilon: f64, xi: f64) -> Result<f64> {
    if !(epsilon > 0.0) || !(xi >= 0.0) || !(epsilon + xi > 0.0) {
        return Err(Error::Domain(format!(
            "stationary availability needs epsilon > 0 and xi >= 0, got ({epsilon}, {xi})"
        )));
    }
    Ok(epsilon / (epsilon + xi))
}

/// Two-state Markov channel. `epsilon` is the busy→idle and `xi` the
/// idle→busy transition probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub epsilon: f64,
    pub xi: f64,
    pub theta: f64,
}

impl ChannelSpec {
    pub fn new(epsilon: f64, xi: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(xi >= 0.0 && xi < 1.0) {
            return Err(Error::Domain(format!("xi must lie in [0, 1), got {xi}")));
        }
        let theta = stationary_availability(epsilon, xi)?;
        Ok(Self { epsilon, xi, theta })
    }

    /// Draws a state from the stationary law.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        if rng.random::<f64>() < self.theta {
            ChannelState::Idle
        } else {
            ChannelState::Busy
        }
    }
}

/// Advances a channel by one slot according to its transition matrix.
pub fn step_channel_state<R: Rng + ?Sized>(state: ChannelState, spec: &ChannelSpec, rng: &mut R) -> ChannelState {
    let u: f64 = rng.random();
    match state {
        ChannelState::Busy if u < spec.epsilon => ChannelState::Idle,
        ChannelState::Busy => ChannelState::Busy,
        ChannelState::Idle if u < spec.xi => ChannelState::Busy,
        ChannelState::Idle => ChannelState::Idle,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    /// Persistence (contention) probability.
    pub p: f64,
    /// Transmit power in mW.
    pub zeta: f64,
    /// Per-slot energy budget; `zeta * p <= nu`.
    pub nu: f64,
    /// Travel radius for a single location update.
    pub travel_radius: f64,
    /// Location-update timer density.
    pub timer_density: f64,
    /// Locations this user is willing to occupy, sorted and deduplicated.
    pub allowed_locations: Vec<usize>,
    pub initial_location: usize,
}

/// Finite location set with pairwise distances, per-location rate scale
/// `h_d`, and the common interference range.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationSpace {
    len: usize,
    distances: Vec<f64>,
    scale: Vec<f64>,
    range: f64,
}

impl LocationSpace {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distances[a * self.len + b]
    }

    pub fn scale(&self, d: usize) -> f64 {
        self.scale[d]
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// How per-slot data rates are drawn on an idle channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    /// The rate is always exactly its mean.
    Constant,
    /// `B · X` with `X` standard exponential.
    MeanExponential,
    /// Shannon capacity under Rayleigh fading, scaled by `h_d`.
    ShannonRayleigh,
}

#[derive(Debug, Clone, PartialEq)]
struct ShannonParams {
    bandwidth_mhz: Vec<f64>,
    noise_mw: f64,
    /// `[user][channel]`
    mean_gain: Vec<Vec<f64>>,
}

/// Mean rate table `B^n_{m,d}` plus the sampling law around it.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    mode: RateMode,
    channels: usize,
    locations: usize,
    means: Vec<f64>,
    shannon: Option<ShannonParams>,
}

impl RateModel {
    pub fn mode(&self) -> RateMode {
        self.mode
    }

    pub fn mean(&self, n: usize, m: usize, d: usize) -> f64 {
        self.means[(n * self.channels + m) * self.locations + d]
    }
}

/// `E[ln(1 + s·G)]` for `G` standard exponential, by adaptive Simpson
/// quadrature on the truncated range `[0, 60]`.
pub fn mean_log_one_plus_exponential(snr: f64) -> f64 {
    fn f(snr: f64, u: f64) -> f64 {
        (snr * u).ln_1p() * (-u).exp()
    }
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn adapt(snr: f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(snr, lm);
        let frm = f(snr, rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adapt(snr, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adapt(snr, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if snr <= 0.0 {
        return 0.0;
    }
    // Split at the knee of ln(1 + s u) so the adaptive pass sees both scales.
    let knee = (1.0 / snr).min(60.0);
    let mut total = 0.0;
    for (a, b) in [(0.0, knee), (knee, 60.0)] {
        if b <= a {
            continue;
        }
        let (fa, fb, fm) = (f(snr, a), f(snr, b), f(snr, 0.5 * (a + b)));
        let whole = simpson(a, b, fa, fm, fb);
        total += adapt(snr, a, b, fa, fm, fb, whole, 1e-13, 48);
    }
    total
}

/// Draws one per-slot data rate for user `n` on channel `m` at location `d`.
pub fn sample_rate<R: Rng + ?Sized>(scenario: &Scenario, n: usize, m: usize, d: usize, rng: &mut R) -> f64 {
    let model = &scenario.rates;
    match model.mode {
        RateMode::Constant => model.mean(n, m, d),
        RateMode::MeanExponential => {
            let x: f64 = Exp1.sample(rng);
            model.mean(n, m, d) * x
        }
        RateMode::ShannonRayleigh => {
            let sh = model.shannon.as_ref().expect("shannon parameters present");
            let g: f64 = Exp1.sample(rng);
            let gain = sh.mean_gain[n][m] * g;
            let snr = scenario.users[n].zeta * gain / sh.noise_mw;
            scenario.space.scale(d) * sh.bandwidth_mhz[m] * (snr).ln_1p() / std::f64::consts::LN_2
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub epsilon: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub p: f64,
    pub zeta: f64,
    pub nu: f64,
    #[serde(default)]
    pub travel_radius: f64,
    #[serde(default = "default_timer_density")]
    pub timer_density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_locations: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_location: Option<usize>,
}

fn default_timer_density() -> f64 {
    1.0
}

/// Either planar coordinates (Euclidean distances are derived) or an
/// explicit distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    /// Per-location rate scale `h_d`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub mode: RateMode,
    /// Full `[user][channel][location]` mean table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Vec<Vec<f64>>>>,
    /// `[user][channel]` means, multiplied by each location's `h_d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_means: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_mhz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dbm: Option<f64>,
    /// `[user][channel]` mean fading gain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_gain: Option<Vec<Vec<f64>>>,
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Interference range δ shared by all users.
    pub range: f64,
    #[serde(default = "default_contention_bounds")]
    pub contention_bounds: [f64; 2],
    pub channels: Vec<ChannelConfig>,
    pub users: Vec<UserConfig>,
    pub locations: LocationConfig,
    pub rates: RateConfig,
    /// Profile-independent interference edges between users. Every edge
    /// must be listed in both directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_edges: Option<Vec<[usize; 2]>>,
}

fn default_contention_bounds() -> [f64; 2] {
    [0.01, 0.99]
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Checks every invariant and builds the immutable scenario.
    pub fn validate(&self) -> Result<Scenario> {
        Scenario::build(self, true)
    }

    /// Like [`validate`](Self::validate) but skips the contention-range and
    /// energy checks, so `p_n = 1` is accepted. Structural checks (indices,
    /// symmetry, positivity of means) still apply. Slot-level experiments at
    /// the contention boundary need this.
    pub fn build_unchecked(&self) -> Result<Scenario> {
        Scenario::build(self, false)
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    config: ScenarioConfig,
    pub channels: Vec<ChannelSpec>,
    pub users: Vec<UserSpec>,
    pub space: LocationSpace,
    pub rates: RateModel,
    /// Dense user adjacency when explicit edges are configured.
    explicit_adjacency: Option<Vec<bool>>,
    /// `ln(θ_m B^n_{m,d} p_n)`, indexed like the rate table.
    log_base: Vec<f64>,
    /// `ln(1 - p_n)`.
    log_idle: Vec<f64>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        ScenarioConfig::from_toml(text)?.validate()
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_locations(&self) -> usize {
        self.space.len()
    }

    pub fn theta(&self, m: usize) -> f64 {
        self.channels[m].theta
    }

    pub fn mean_rate(&self, n: usize, m: usize, d: usize) -> f64 {
        self.rates.mean(n, m, d)
    }

    /// `ln(θ_m · B^n_{m,d} · p_n)`: the utility of user `n` with no
    /// same-channel neighbour.
    #[inline]
    pub fn log_base(&self, n: usize, m: usize, d: usize) -> f64 {
        self.log_base[(n * self.channels.len() + m) * self.space.len + d]
    }

    /// `ln(1 - p_n)`, the generalized congestion each neighbour adds.
    #[inline]
    pub fn log_idle(&self, n: usize) -> f64 {
        self.log_idle[n]
    }

    /// Potential weight `-ln(1 - p_n)`.
    #[inline]
    pub fn weight(&self, n: usize) -> f64 {
        -self.log_idle[n]
    }

    pub fn has_explicit_edges(&self) -> bool {
        self.explicit_adjacency.is_some()
    }

    pub fn initial_locations(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.initial_location).collect()
    }

    /// Whether users `i` and `j` interfere when at locations `di`, `dj`.
    #[inline]
    pub fn interferes(&self, i: usize, j: usize, di: usize, dj: usize) -> bool {
        if i == j {
            return false;
        }
        match &self.explicit_adjacency {
            Some(adj) => adj[i * self.users.len() + j],
            None => self.space.distance(di, dj) <= self.space.range,
        }
    }

    /// Locations user `n` may move to in one update from `from`:
    /// allowed locations other than `from` within its travel radius.
    pub fn feasible_moves(&self, n: usize, from: usize) -> Vec<usize> {
        let user = &self.users[n];
        user.allowed_locations
            .iter()
            .copied()
            .filter(|&d| d != from && self.space.distance(d, from) <= user.travel_radius)
            .collect()
    }

    pub fn check_user(&self, n: usize) -> Result<()> {
        if n >= self.num_users() {
            return Err(Error::Index {
                kind: "user",
                index: n,
                size: self.num_users(),
            });
        }
        Ok(())
    }

    fn build(config: &ScenarioConfig, strict: bool) -> Result<Self> {
        let n_users = config.users.len();
        let n_channels = config.channels.len();
        if n_users == 0 {
            return Err(Error::validation("users", "at least one user is required"));
        }
        if n_channels == 0 {
            return Err(Error::validation("channels", "at least one channel is required"));
        }
        if !(config.range >= 0.0) || !config.range.is_finite() {
            return Err(Error::validation("range", "must be finite and nonnegative"));
        }
        let [p_min, p_max] = config.contention_bounds;
        if strict && !(0.0 < p_min && p_min < p_max && p_max < 1.0) {
            return Err(Error::validation(
                "contention_bounds",
                format!("need 0 < p_min < p_max < 1, got [{p_min}, {p_max}]"),
            ));
        }

        let channels = config
            .channels
            .iter()
            .enumerate()
            .map(|(m, c)| {
                ChannelSpec::new(c.epsilon, c.xi)
                    .map_err(|e| Error::validation(format!("channels[{m}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;

        let space = build_space(&config.locations, config.range)?;
        let n_loc = space.len;

        let mut users = Vec::with_capacity(n_users);
        for (n, u) in config.users.iter().enumerate() {
            let field = |name: &str| format!("users[{n}].{name}");
            if strict {
                if !(p_min < u.p && u.p < p_max) {
                    return Err(Error::validation(
                        field("p"),
                        format!("{} outside ({p_min}, {p_max})", u.p),
                    ));
                }
                if u.zeta * u.p > u.nu {
                    return Err(Error::validation(
                        field("nu"),
                        format!("energy constraint violated: zeta*p = {} > nu = {}", u.zeta * u.p, u.nu),
                    ));
                }
            } else if !(u.p > 0.0 && u.p <= 1.0) {
                return Err(Error::validation(field("p"), format!("{} outside (0, 1]", u.p)));
            }
            if !(u.zeta > 0.0) {
                return Err(Error::validation(field("zeta"), "transmit power must be positive"));
            }
            if !(u.travel_radius >= 0.0) {
                return Err(Error::validation(field("travel_radius"), "must be nonnegative"));
            }
            if !(u.timer_density > 0.0) || !u.timer_density.is_finite() {
                return Err(Error::validation(field("timer_density"), "must be positive and finite"));
            }
            let mut allowed = match &u.allowed_locations {
                Some(list) => list.clone(),
                None => (0..n_loc).collect(),
            };
            allowed.sort_unstable();
            allowed.dedup();
            if allowed.is_empty() {
                return Err(Error::validation(field("allowed_locations"), "must be nonempty"));
            }
            if let Some(&bad) = allowed.iter().find(|&&d| d >= n_loc) {
                return Err(Error::validation(
                    field("allowed_locations"),
                    format!("location {bad} out of range ({n_loc} locations)"),
                ));
            }
            let initial = u.initial_location.unwrap_or(allowed[0]);
            if !allowed.contains(&initial) {
                return Err(Error::validation(
                    field("initial_location"),
                    format!("location {initial} is not an allowed location"),
                ));
            }
            users.push(UserSpec {
                p: u.p,
                zeta: u.zeta,
                nu: u.nu,
                travel_radius: u.travel_radius,
                timer_density: u.timer_density,
                allowed_locations: allowed,
                initial_location: initial,
            });
        }

        let rates = build_rates(&config.rates, &users, &space, n_channels)?;

        let explicit_adjacency = match &config.explicit_edges {
            None => None,
            Some(edges) => {
                let mut adj = vec![false; n_users * n_users];
                for (k, &[i, j]) in edges.iter().enumerate() {
                    if i >= n_users || j >= n_users {
                        return Err(Error::validation(
                            format!("explicit_edges[{k}]"),
                            format!("user index out of range in ({i}, {j})"),
                        ));
                    }
                    if i == j {
                        return Err(Error::validation(
                            format!("explicit_edges[{k}]"),
                            format!("self-loop on user {i}"),
                        ));
                    }
                    adj[i * n_users + j] = true;
                }
                for i in 0..n_users {
                    for j in 0..n_users {
                        if adj[i * n_users + j] != adj[j * n_users + i] {
                            return Err(Error::validation(
                                "explicit_edges",
                                format!("edge ({i}, {j}) is listed without its reverse"),
                            ));
                        }
                    }
                }
                Some(adj)
            }
        };

        let mut log_base = vec![0.0; n_users * n_channels * n_loc];
        for n in 0..n_users {
            for m in 0..n_channels {
                for d in 0..n_loc {
                    let idx = (n * n_channels + m) * n_loc + d;
                    log_base[idx] = (channels[m].theta * rates.means[idx] * users[n].p).ln();
                }
            }
        }
        let log_idle = users.iter().map(|u| (1.0 - u.p).ln()).collect();

        Ok(Scenario {
            config: config.clone(),
            channels,
            users,
            space,
            rates,
            explicit_adjacency,
            log_base,
            log_idle,
        })
    }
}

fn build_space(cfg: &LocationConfig, range: f64) -> Result<LocationSpace> {
    let distances: Vec<Vec<f64>> = match (&cfg.coordinates, &cfg.distances) {
        (Some(_), Some(_)) => {
            return Err(Error::validation(
                "locations",
                "give either coordinates or distances, not both",
            ))
        }
        (None, None) => return Err(Error::validation("locations", "coordinates or distances required")),
        (Some(coords), None) => coords
            .iter()
            .map(|a| {
                coords
                    .iter()
                    .map(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                    .collect()
            })
            .collect(),
        (None, Some(dist)) => dist.clone(),
    };
    let len = distances.len();
    if len == 0 {
        return Err(Error::validation("locations", "at least one location is required"));
    }
    let mut flat = Vec::with_capacity(len * len);
    for (i, row) in distances.iter().enumerate() {
        if row.len() != len {
            return Err(Error::validation(
                format!("locations.distances[{i}]"),
                format!("row has {} entries, expected {len}", row.len()),
            ));
        }
        for (j, &x) in row.iter().enumerate() {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::validation(
                    format!("locations.distances[{i}][{j}]"),
                    "must be finite and nonnegative",
                ));
            }
            if i == j && x != 0.0 {
                return Err(Error::validation(
                    format!("locations.distances[{i}][{i}]"),
                    "diagonal must be zero",
                ));
            }
            if x != distances[j][i] {
                return Err(Error::validation(
                    format!("locations.distances[{i}][{j}]"),
                    "distance matrix must be symmetric",
                ));
            }
            flat.push(x);
        }
    }
    let scale = match &cfg.scale {
        None => vec![1.0; len],
        Some(s) => s.clone(),
    };
    if scale.len() != len {
        return Err(Error::validation(
            "locations.scale",
            format!("{} entries for {len} locations", scale.len()),
        ));
    }
    if let Some(d) = scale.iter().position(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::validation(format!("locations.scale[{d}]"), "must be positive"));
    }
    Ok(LocationSpace {
        len,
        distances: flat,
        scale,
        range,
    })
}

fn build_rates(cfg: &RateConfig, users: &[UserSpec], space: &LocationSpace, n_channels: usize) -> Result<RateModel> {
    let n_users = users.len();
    let n_loc = space.len;
    let mut means = vec![0.0; n_users * n_channels * n_loc];
    let idx = |n: usize, m: usize, d: usize| (n * n_channels + m) * n_loc + d;
    let check_rows = |field: &str, rows: usize, cols: usize, table: &[Vec<f64>]| -> Result<()> {
        if table.len() != rows || table.iter().any(|r| r.len() != cols) {
            return Err(Error::validation(
                format!("rates.{field}"),
                format!("expected a {rows}x{cols} table"),
            ));
        }
        Ok(())
    };

    let mut shannon = None;
    match cfg.mode {
        RateMode::Constant | RateMode::MeanExponential => match (&cfg.means, &cfg.base_means) {
            (Some(full), None) => {
                if full.len() != n_users {
                    return Err(Error::validation(
                        "rates.means",
                        format!("{} user rows for {n_users} users", full.len()),
                    ));
                }
                for (n, per_user) in full.iter().enumerate() {
                    check_rows(&format!("means[{n}]"), n_channels, n_loc, per_user)?;
                    for m in 0..n_channels {
                        for d in 0..n_loc {
                            means[idx(n, m, d)] = per_user[m][d];
                        }
                    }
                }
            }
            (None, Some(base)) => {
                check_rows("base_means", n_users, n_channels, base)?;
                for n in 0..n_users {
                    for m in 0..n_channels {
                        for d in 0..n_loc {
                            means[idx(n, m, d)] = base[n][m] * space.scale(d);
                        }
                    }
                }
            }
            _ => {
                return Err(Error::validation(
                    "rates",
                    "exactly one of means or base_means is required",
                ))
            }
        },
        RateMode::ShannonRayleigh => {
            let (Some(bw), Some(noise_dbm), Some(gain)) = (&cfg.bandwidth_mhz, cfg.noise_dbm, &cfg.mean_gain) else {
                return Err(Error::validation(
                    "rates",
                    "shannon-rayleigh needs bandwidth_mhz, noise_dbm and mean_gain",
                ));
            };
            if bw.len() != n_channels {
                return Err(Error::validation(
                    "rates.bandwidth_mhz",
                    format!("{} entries for {n_channels} channels", bw.len()),
                ));
            }
            check_rows("mean_gain", n_users, n_channels, gain)?;
            let noise_mw = 10f64.powf(noise_dbm / 10.0);
            for n in 0..n_users {
                for m in 0..n_channels {
                    let snr = users[n].zeta * gain[n][m] / noise_mw;
                    let per_hz = mean_log_one_plus_exponential(snr) / std::f64::consts::LN_2;
                    for d in 0..n_loc {
                        means[idx(n, m, d)] = space.scale(d) * bw[m] * per_hz;
                    }
                }
            }
            shannon = Some(ShannonParams {
                bandwidth_mhz: bw.clone(),
                noise_mw,
                mean_gain: gain.clone(),
            });
        }
    }
    for n in 0..n_users {
        for m in 0..n_channels {
            for d in 0..n_loc {
                let b = means[idx(n, m, d)];
                if !(b > 0.0) || !b.is_finite() {
                    return Err(Error::validation(
                        format!("rates.means[{n}][{m}][{d}]"),
                        format!("mean rate must be positive and finite, got {b}"),
                    ));
                }
            }
        }
    }
    Ok(RateModel {
        mode: cfg.mode,
        channels: n_channels,
        locations: n_loc,
        means,
        shannon,
    })
}

/// Adjacency of the interference graph for one location profile.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceGraph {
    neighbors: Vec<Vec<usize>>,
}

impl InterferenceGraph {
    pub fn build(scenario: &Scenario, locations: &[usize]) -> Result<Self> {
        let n_users = scenario.num_users();
        if locations.len() != n_users {
            return Err(Error::Domain(format!(
                "location profile has {} entries for {n_users} users",
                locations.len()
            )));
        }
        if let Some(&bad) = locations.iter().find(|&&d| d >= scenario.num_locations()) {
            return Err(Error::Index {
                kind: "location",
                index: bad,
                size: scenario.num_locations(),
            });
        }
        Ok(Self::build_unchecked(scenario, locations))
    }

    pub(crate) fn build_unchecked(scenario: &Scenario, locations: &[usize]) -> Self {
        let n_users = scenario.num_users();
        let neighbors = (0..n_users)
            .map(|i| {
                (0..n_users)
                    .filter(|&j| scenario.interferes(i, j, locations[i], locations[j]))
                    .collect()
            })
            .collect();
        Self { neighbors }
    }

    pub fn neighbors(&self, n: usize) -> &[usize] {
        &self.neighbors[n]
    }

    pub fn degree(&self, n: usize) -> usize {
        self.neighbors[n].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_users(&self) -> usize {
        self.neighbors.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }
}



#[cfg(test)]
mod proptests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn graph_symmetric_and_monotone_in_range(
            positions in prop::collection::vec(0.0f64..10.0, 2..6),
            profile_seed in prop::collection::vec(0usize..6, 4),
            range in 0.0f64..6.0,
            extra in 0.0f64..4.0,
        ) {
            let users = vec![(0.5, vec![1.0]); 4];
            let small = line_scenario(range, &[0.5], &users, &positions);
            let large = line_scenario(range + extra, &[0.5], &users, &positions);
            let d: Vec<usize> = profile_seed.iter().map(|&k| k % positions.len()).collect();
            let g = InterferenceGraph::build(&small, &d).unwrap();
            let h = InterferenceGraph::build(&large, &d).unwrap();
            for i in 0..4 {
                prop_assert!(!g.has_edge(i, i));
                for j in 0..4 {
                    prop_assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
                    if g.has_edge(i, j) {
                        prop_assert!(h.has_edge(i, j));
                    }
                }
            }
        }
    }
}
