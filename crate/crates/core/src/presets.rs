//! Scenario generators for the standard experiment families.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{SeedRoot, Substream};
use crate::scenario::{ChannelConfig, LocationConfig, RateConfig, RateMode, ScenarioConfig, UserConfig};

/// Mean rate vectors (Mbps) of the three user groups over five channels.
pub const BENCHMARK_RATE_GROUPS: [[f64; 5]; 3] = [
    [0.1, 0.3, 0.8, 1.0, 1.5],
    [0.2, 0.6, 1.6, 2.0, 3.0],
    [0.5, 1.5, 4.0, 5.0, 7.5],
];

/// Contention probabilities are drawn from `{0.1, 0.2, …, 0.9}`.
pub const CONTENTION_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Location rate scales of the obstacle grid.
pub const GRID_SCALES: [f64; 3] = [0.5, 1.0, 2.0];

const TRANSMIT_POWER_MW: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    RegularRing,
    Complete,
    RandomGnp,
    ScatterSquare,
    GridObstacles,
    Paper9x5,
    Uniqueness2x2x2,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::RegularRing,
        Preset::Complete,
        Preset::RandomGnp,
        Preset::ScatterSquare,
        Preset::GridObstacles,
        Preset::Paper9x5,
        Preset::Uniqueness2x2x2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::RegularRing => "regular-ring",
            Preset::Complete => "complete",
            Preset::RandomGnp => "random-gnp",
            Preset::ScatterSquare => "scatter-square",
            Preset::GridObstacles => "grid-obstacles",
            Preset::Paper9x5 => "paper-9x5",
            Preset::Uniqueness2x2x2 => "uniqueness-2x2x2",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::validation("preset", format!("unknown preset `{s}`")))
    }
}

/// Interference topology of the nine-user benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NineNodeGraph {
    /// Cycle `C_9`.
    Ring,
    /// Circulant `C_9(1, 2)`, 4-regular.
    Circulant,
    /// 3 × 3 lattice.
    Lattice,
    /// Connected `G(9, 0.35)` sample.
    Random,
}

impl NineNodeGraph {
    pub const ALL: [NineNodeGraph; 4] = [
        NineNodeGraph::Ring,
        NineNodeGraph::Circulant,
        NineNodeGraph::Lattice,
        NineNodeGraph::Random,
    ];
}

/// Knobs shared by the generators; each preset reads the ones it needs
/// and falls back to its own defaults for `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOptions {
    pub users: Option<usize>,
    pub channels: Option<usize>,
    /// Neighbours on each side in `regular-ring`.
    pub ring_reach: Option<usize>,
    pub edge_probability: Option<f64>,
    /// Side length of `scatter-square`.
    pub side: Option<f64>,
    pub range: Option<f64>,
    pub grid_rows: Option<usize>,
    pub grid_cols: Option<usize>,
    pub obstacles: Option<usize>,
    /// Per-candidate location-update rate `τ_n`.
    pub timer_density: Option<f64>,
    pub graph: Option<NineNodeGraph>,
}

/// Builds a scenario configuration for `preset`. The result always passes
/// validation.
pub fn generate(preset: Preset, options: &PresetOptions, seed: SeedRoot) -> Result<ScenarioConfig> {
    let mut rng = seed.stream(Substream::Generator);
    let cfg = match preset {
        Preset::RegularRing => {
            let n = options.users.unwrap_or(9);
            let reach = options.ring_reach.unwrap_or(1);
            static_graph(options, ring_edges(n, reach), n, &mut rng)
        }
        Preset::Complete => {
            let n = options.users.unwrap_or(6);
            let edges = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| [i, j]))
                .collect();
            static_graph(options, edges, n, &mut rng)
        }
        Preset::RandomGnp => {
            let n = options.users.unwrap_or(9);
            let prob = options.edge_probability.unwrap_or(0.35);
            if !(0.0..=1.0).contains(&prob) {
                return Err(Error::validation("edge_probability", format!("{prob} outside [0, 1]")));
            }
            let edges = gnp_edges(n, prob, &mut rng);
            static_graph(options, edges, n, &mut rng)
        }
        Preset::ScatterSquare => scatter_square(options, &mut rng),
        Preset::GridObstacles => grid_obstacles(options, &mut rng)?,
        Preset::Paper9x5 => {
            let edges = match options.graph.unwrap_or(NineNodeGraph::Random) {
                NineNodeGraph::Ring => ring_edges(9, 1),
                NineNodeGraph::Circulant => ring_edges(9, 2),
                NineNodeGraph::Lattice => lattice_edges(3, 3),
                NineNodeGraph::Random => connected_gnp_edges(9, 0.35, &mut rng),
            };
            let opts = PresetOptions {
                users: Some(9),
                channels: Some(5),
                ..options.clone()
            };
            static_graph(&opts, edges, 9, &mut rng)
        }
        Preset::Uniqueness2x2x2 => uniqueness(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn channels(m: usize) -> Vec<ChannelConfig> {
    vec![ChannelConfig { epsilon: 0.3, xi: 0.3 }; m]
}

fn user(
    p: f64,
    travel_radius: f64,
    timer_density: f64,
    allowed: Option<Vec<usize>>,
    initial: Option<usize>,
) -> UserConfig {
    UserConfig {
        p,
        zeta: TRANSMIT_POWER_MW,
        nu: TRANSMIT_POWER_MW,
        travel_radius,
        timer_density,
        allowed_locations: allowed,
        initial_location: initial,
    }
}

/// Group `n mod 3` rate vector, keeping its best `m` channels when `m < 5`
/// and cycling it when `m > 5`.
fn group_rates(n: usize, m: usize) -> Vec<f64> {
    let group = &BENCHMARK_RATE_GROUPS[n % 3];
    if m <= 5 {
        group[5 - m..].to_vec()
    } else {
        (0..m).map(|k| group[k % 5]).collect()
    }
}

fn group_of(n: usize, n_users: usize) -> usize {
    if n_users >= 3 {
        n * 3 / n_users
    } else {
        n
    }
}

/// Users at one shared location with a fixed interference graph.
fn static_graph<R: Rng>(options: &PresetOptions, edges: Vec<[usize; 2]>, n: usize, rng: &mut R) -> ScenarioConfig {
    let m = options.channels.unwrap_or(5);
    ScenarioConfig {
        range: 0.0,
        contention_bounds: [0.01, 0.99],
        channels: channels(m),
        users: (0..n)
            .map(|_| user(*CONTENTION_LEVELS.choose(rng).unwrap(), 0.0, 1.0, None, None))
            .collect(),
        locations: LocationConfig {
            coordinates: Some(vec![[0.0, 0.0]]),
            distances: None,
            scale: None,
        },
        rates: RateConfig {
            mode: RateMode::MeanExponential,
            means: None,
            base_means: Some((0..n).map(|k| group_rates(group_of(k, n), m)).collect()),
            bandwidth_mhz: None,
            noise_dbm: None,
            mean_gain: None,
        },
        explicit_edges: Some(edges),
    }
}

fn both_ways(pairs: impl IntoIterator<Item = (usize, usize)>) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = pairs.into_iter().flat_map(|(i, j)| [[i, j], [j, i]]).collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Each user linked to `reach` neighbours on either side of a cycle.
pub fn ring_edges(n: usize, reach: usize) -> Vec<[usize; 2]> {
    both_ways(
        (0..n)
            .flat_map(|i| (1..=reach).map(move |k| (i, (i + k) % n)))
            .filter(|&(i, j)| i != j),
    )
}

/// Four-neighbour `rows × cols` lattice, row-major.
pub fn lattice_edges(rows: usize, cols: usize) -> Vec<[usize; 2]> {
    let mut pairs = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                pairs.push((i, i + 1));
            }
            if r + 1 < rows {
                pairs.push((i, i + cols));
            }
        }
    }
    both_ways(pairs)
}

pub fn gnp_edges<R: Rng>(n: usize, prob: f64, rng: &mut R) -> Vec<[usize; 2]> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < prob {
                pairs.push((i, j));
            }
        }
    }
    both_ways(pairs)
}

/// `G(n, p)` resampled until connected.
pub fn connected_gnp_edges<R: Rng>(n: usize, prob: f64, rng: &mut R) -> Vec<[usize; 2]> {
    loop {
        let edges = gnp_edges(n, prob, rng);
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for e in edges.iter().filter(|e| e[0] == i) {
                if !seen[e[1]] {
                    seen[e[1]] = true;
                    stack.push(e[1]);
                }
            }
        }
        if seen.iter().all(|&v| v) {
            return edges;
        }
    }
}

/// Users scattered uniformly in a square, each pinned to its own spot.
fn scatter_square<R: Rng>(options: &PresetOptions, rng: &mut R) -> ScenarioConfig {
    let n = options.users.unwrap_or(50);
    let m = options.channels.unwrap_or(5);
    let side = options.side.unwrap_or(250.0);
    let coordinates: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    ScenarioConfig {
        range: options.range.unwrap_or(60.0),
        contention_bounds: [0.01, 0.99],
        channels: channels(m),
        users: (0..n)
            .map(|k| {
                user(
                    *CONTENTION_LEVELS.choose(rng).unwrap(),
                    0.0,
                    1.0,
                    Some(vec![k]),
                    Some(k),
                )
            })
            .collect(),
        locations: LocationConfig {
            coordinates: Some(coordinates),
            distances: None,
            scale: None,
        },
        rates: RateConfig {
            mode: RateMode::MeanExponential,
            means: None,
            base_means: Some((0..n).map(|k| group_rates(k % 3, m)).collect()),
            bandwidth_mhz: None,
            noise_dbm: None,
            mean_gain: None,
        },
        explicit_edges: None,
    }
}

/// Unit-spaced grid with obstacle cells. Interference and moves both reach
/// the eight surrounding cells. Everyone starts in the bottom-left cell.
fn grid_obstacles<R: Rng>(options: &PresetOptions, rng: &mut R) -> Result<ScenarioConfig> {
    let rows = options.grid_rows.unwrap_or(3);
    let cols = options.grid_cols.unwrap_or(3);
    let n = options.users.unwrap_or(4);
    let m = options.channels.unwrap_or(3);
    let cells = rows * cols;
    let n_obstacles = options.obstacles.unwrap_or(1);
    if cells == 0 || n_obstacles + 1 > cells {
        return Err(Error::validation(
            "obstacles",
            format!("{n_obstacles} obstacles leave no free cell in a {rows}x{cols} grid"),
        ));
    }
    // Resample obstacle placements until the free cells stay connected
    // under king moves.
    let free = loop {
        let mut others: Vec<usize> = (1..cells).collect();
        others.shuffle(rng);
        let blocked = &others[..n_obstacles];
        let free: Vec<usize> = (0..cells).filter(|c| !blocked.contains(c)).collect();
        if king_connected(&free, cols) {
            break free;
        }
    };
    let coordinates: Vec<[f64; 2]> = (0..cells).map(|c| [(c % cols) as f64, (c / cols) as f64]).collect();
    let scale: Vec<f64> = (0..cells).map(|_| *GRID_SCALES.choose(rng).unwrap()).collect();
    let tau = options.timer_density.unwrap_or(0.1);
    Ok(ScenarioConfig {
        range: options.range.unwrap_or(1.5),
        contention_bounds: [0.01, 0.99],
        channels: channels(m),
        users: (0..n)
            .map(|_| {
                user(
                    *CONTENTION_LEVELS.choose(rng).unwrap(),
                    1.5,
                    tau,
                    Some(free.clone()),
                    Some(0),
                )
            })
            .collect(),
        locations: LocationConfig {
            coordinates: Some(coordinates),
            distances: None,
            scale: Some(scale),
        },
        rates: RateConfig {
            mode: RateMode::MeanExponential,
            means: None,
            base_means: Some((0..n).map(|k| group_rates(group_of(k, n), m)).collect()),
            bandwidth_mhz: None,
            noise_dbm: None,
            mean_gain: None,
        },
        explicit_edges: None,
    })
}

fn king_connected(free: &[usize], cols: usize) -> bool {
    let adjacent = |a: usize, b: usize| {
        let (ra, ca) = ((a / cols) as i64, (a % cols) as i64);
        let (rb, cb) = ((b / cols) as i64, (b % cols) as i64);
        (ra - rb).abs() <= 1 && (ca - cb).abs() <= 1
    };
    let mut seen = vec![false; free.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..free.len() {
            if !seen[j] && adjacent(free[i], free[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&v| v)
}

/// Two users, two channels, two locations within range of each other:
/// `θ = 0.5`, `B = 2` everywhere, `p = 0.5`.
fn uniqueness() -> ScenarioConfig {
    ScenarioConfig {
        range: 2.0,
        contention_bounds: [0.01, 0.99],
        channels: vec![ChannelConfig { epsilon: 0.2, xi: 0.2 }; 2],
        users: (0..2).map(|_| user(0.5, 10.0, 1.0, None, Some(0))).collect(),
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
    }
}

/// Ranges for [`random_instance`]. Instances are small enough for every
/// exhaustive routine in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceBounds {
    pub max_users: usize,
    pub max_channels: usize,
    pub max_locations: usize,
    pub p: (f64, f64),
    pub rate: (f64, f64),
    /// Users within this distance interfere; locations lie in the unit square.
    pub range: f64,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        Self {
            max_users: 6,
            max_channels: 3,
            max_locations: 4,
            p: (0.05, 0.9),
            rate: (0.2, 3.0),
            range: 0.5,
        }
    }
}

/// A random small scenario: channel qualities, contention levels, rate
/// means, location coordinates, travel radii and starting points are all
/// drawn from `seed`.
pub fn random_instance(bounds: &InstanceBounds, seed: SeedRoot) -> ScenarioConfig {
    let mut rng = seed.stream(Substream::Generator);
    let n = rng.random_range(1..=bounds.max_users);
    let m = rng.random_range(1..=bounds.max_channels);
    let l = rng.random_range(1..=bounds.max_locations);
    let coordinates: Vec<[f64; 2]> = (0..l).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let channels = (0..m)
        .map(|_| ChannelConfig {
            epsilon: rng.random_range(0.1..0.9),
            xi: rng.random_range(0.0..0.9),
        })
        .collect();
    let users = (0..n)
        .map(|_| {
            let p = rng.random_range(bounds.p.0..bounds.p.1);
            let radius = rng.random_range(0.3..1.5);
            user(
                p,
                radius,
                rng.random_range(0.5..2.0),
                None,
                Some(rng.random_range(0..l)),
            )
        })
        .collect();
    let base_means = (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(bounds.rate.0..bounds.rate.1)).collect())
        .collect();
    let scale = (0..l).map(|_| *GRID_SCALES.choose(&mut rng).unwrap()).collect();
    ScenarioConfig {
        range: bounds.range,
        contention_bounds: [0.01, 0.99],
        channels,
        users,
        locations: LocationConfig {
            coordinates: Some(coordinates),
            distances: None,
            scale: Some(scale),
        },
        rates: RateConfig {
            mode: RateMode::MeanExponential,
            means: None,
            base_means: Some(base_means),
            bandwidth_mhz: None,
            noise_dbm: None,
            mean_gain: None,
        },
        explicit_edges: None,
    }
}
