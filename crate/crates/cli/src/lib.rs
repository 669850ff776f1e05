//! The `spectrum` command line: scenario generation, learning, mobility,
//! joint runs and exact analysis, each writing CSV traces and a JSON
//! summary into an output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use spectrum_core::analysis;
use spectrum_core::game::{self, DEFAULT_BUDGET};
use spectrum_core::learning::{self, LearningParams, StepSchedule};
use spectrum_core::mobility::{self, ChannelOracle, MobilityParams, MobilityTrace, TimerDistribution};
use spectrum_core::normalization::DEFAULT_FLOOR;
use spectrum_core::presets::{self, NineNodeGraph, Preset, PresetOptions};
use spectrum_core::{DeviationSpace, Error, Profile, Scenario, SeedRoot, UtilityNormalization};

#[derive(Debug, Parser)]
#[command(name = "spectrum", version, about = "Distributed spectrum access with spatial reuse")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run distributed channel learning at the scenario's initial locations.
    Learn(LearnArgs),
    /// Run the location-update chain with channels held fixed.
    Mobility(MobilityArgs),
    /// Run joint channel selection and mobility.
    Joint(JointArgs),
    /// Price of anarchy and its bounds.
    Analyze(AnalyzeArgs),
    /// List every pure Nash equilibrium.
    Enumerate(EnumerateArgs),
    /// Write a scenario file from a preset.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, env = "SPECTRUM_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
    /// Largest search space exact enumeration may visit.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Args)]
pub struct LearningArgs {
    #[arg(long, default_value_t = 300)]
    pub periods: usize,
    #[arg(long, default_value_t = 100)]
    pub slots_per_period: usize,
    /// Smoothing factor is `scale / T`.
    #[arg(long, default_value_t = 1.0)]
    pub step_scale: f64,
}

impl LearningArgs {
    fn params(&self) -> LearningParams {
        LearningParams {
            slots_per_period: self.slots_per_period,
            periods: self.periods,
            step: StepSchedule { scale: self.step_scale },
            ..LearningParams::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub learning: LearningArgs,
    /// Add every user's mixed strategy to the trace.
    #[arg(long)]
    pub record_strategies: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimerKind {
    Exp,
    Uniform,
    Pareto,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value_t = TimerKind::Exp)]
    pub timer_dist: TimerKind,
    #[arg(long, default_value_t = mobility::DEFAULT_PARETO_SHAPE)]
    pub pareto_shape: f64,
}

impl ChainArgs {
    fn timer(&self) -> TimerDistribution {
        match self.timer_dist {
            TimerKind::Exp => TimerDistribution::Exponential,
            TimerKind::Uniform => TimerDistribution::Uniform,
            TimerKind::Pareto => TimerDistribution::Pareto {
                shape: self.pareto_shape,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct MobilityArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Comma-separated channel per user; defaults to the potential-maximizing
    /// channels at the initial locations.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Exact,
    Learning,
}

#[derive(Debug, Args)]
pub struct JointArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_enum, default_value_t = OracleKind::Exact)]
    pub mode: OracleKind,
    #[command(flatten)]
    pub learning: LearningArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Also report efficiency on normalized utilities.
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceKind {
    Channels,
    Locations,
    Joint,
}

impl From<SpaceKind> for DeviationSpace {
    fn from(k: SpaceKind) -> Self {
        match k {
            SpaceKind::Channels => DeviationSpace::Channels,
            SpaceKind::Locations => DeviationSpace::Locations,
            SpaceKind::Joint => DeviationSpace::Joint,
        }
    }
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = SpaceKind::Joint)]
    pub space: SpaceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    Ring,
    Circulant,
    Lattice,
    Random,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "SPECTRUM_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub range: Option<f64>,
    #[arg(long)]
    pub side: Option<f64>,
    #[arg(long)]
    pub edge_probability: Option<f64>,
    #[arg(long)]
    pub ring_reach: Option<usize>,
    #[arg(long)]
    pub grid_rows: Option<usize>,
    #[arg(long)]
    pub grid_cols: Option<usize>,
    #[arg(long)]
    pub obstacles: Option<usize>,
    #[arg(long)]
    pub timer_density: Option<f64>,
    #[arg(long, value_enum)]
    pub graph: Option<GraphKind>,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io { path: PathBuf, source: io::Error },
    Usage(String),
}

impl CliError {
    /// 2 parse or usage, 3 validation, 4 budget, 5 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Parse(_)) | CliError::Usage(_) => 2,
            CliError::Core(Error::Validation { .. }) => 3,
            CliError::Core(Error::BudgetExceeded { .. }) => 4,
            CliError::Io { .. } => 5,
            CliError::Core(_) => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(Error::Parse(_)) => "config-parse",
            CliError::Usage(_) => "usage",
            CliError::Core(Error::Validation { .. }) => "scenario-validation",
            CliError::Core(Error::BudgetExceeded { .. }) => "budget-exceeded",
            CliError::Io { .. } => "io",
            CliError::Core(_) => "runtime",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.class(), "message": self.to_string() }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Nine significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(Scenario::from_toml(&text)?)
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.clone(),
        source: io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// Runs one command and returns the files it wrote.
pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Learn(a) => learn(a),
        Command::Mobility(a) => mobility_cmd(a),
        Command::Joint(a) => joint(a),
        Command::Analyze(a) => analyze(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Generate(a) => generate(a),
    }
}

fn phi_summary(values: &[f64]) -> serde_json::Value {
    if values.is_empty() {
        return serde_json::Value::Null;
    }
    let tail = &values[values.len().saturating_sub(20)..];
    json!({
        "first": values[0],
        "last": values[values.len() - 1],
        "max": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "mean_last_20": tail.iter().sum::<f64>() / tail.len() as f64,
    })
}

fn learn(args: LearnArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_scenario(&args.common.scenario)?;
    prepare_out(&args.common.out)?;
    let d = s.initial_locations();
    let mut params = args.learning.params();
    params.record_strategies = args.record_strategies;
    let out = learning::run_learning(&s, &d, &params, SeedRoot(args.common.seed))?;

    let n = s.num_users();
    let mut header = vec!["period".to_string()];
    header.extend((0..n).map(|k| format!("channel_{k}")));
    header.extend((0..n).map(|k| format!("u_hat_{k}")));
    if args.record_strategies {
        for k in 0..n {
            header.extend((0..s.num_channels()).map(|m| format!("sigma_{k}_{m}")));
        }
    }
    header.push("phi".into());
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.period.to_string()];
            row.extend(r.channels.iter().map(|c| c.to_string()));
            row.extend(r.payoffs.iter().map(|&u| fmt_float(u)));
            if let Some(sig) = &r.strategies {
                row.extend(sig.iter().flatten().map(|&x| fmt_float(x)));
            }
            row.push(fmt_float(r.potential));
            row
        })
        .collect();
    let trace = write_csv(&args.common.out, "trace.csv", &header, &rows)?;

    let phis: Vec<f64> = out.records.iter().map(|r| r.potential).collect();
    let final_total = game::total_utility(&s, &out.final_profile);
    let base = Profile::new(d.clone(), vec![0; n]);
    let loss = match game::centralized_optimum(&s, &base, DeviationSpace::Channels, args.common.budget) {
        Ok((opt, value)) => Some(json!({
            "optimum": opt,
            "report": analysis::performance_loss_report(final_total, value, n, &out.normalization),
        })),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "command": "learn",
        "seed": args.common.seed,
        "params": params,
        "final_profile": out.final_profile,
        "converged": out.converged,
        "is_nash": game::is_nash(&s, &out.final_profile, DeviationSpace::Channels),
        "final_total_utility": final_total,
        "final_potential": game::potential(&s, &out.final_profile),
        "phi": phi_summary(&phis),
        "normalization": out.normalization,
        "performance_loss": loss,
    });
    let summary = write_json(&args.common.out, "summary.json", &summary)?;
    Ok(vec![trace, summary])
}

fn chain_header() -> Vec<String> {
    [
        "event_time",
        "user",
        "from_location",
        "to_location",
        "accepted",
        "phi",
        "total_utility",
        "channel_profile_hash",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn chain_rows(trace: &MobilityTrace) -> Vec<Vec<String>> {
    let init = &trace.initial;
    let mut rows = Vec::with_capacity(trace.events.len() + 1);
    rows.push(vec![
        fmt_float(0.0),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:016x}", mobility::channel_profile_hash(&init.channels)),
    ]);
    rows.extend(trace.events.iter().map(|e| {
        vec![
            fmt_float(e.time),
            e.user.to_string(),
            e.from.to_string(),
            e.to.to_string(),
            (e.accepted as u8).to_string(),
            fmt_float(e.phi),
            fmt_float(e.total_utility),
            format!("{:016x}", e.channel_hash),
        ]
    }));
    rows
}

fn occupancy_json(occ: &BTreeMap<Vec<usize>, f64>) -> serde_json::Value {
    occ.iter().map(|(d, p)| json!({ "state": d, "empirical": p })).collect()
}

fn mobility_cmd(args: MobilityArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_scenario(&args.common.scenario)?;
    prepare_out(&args.common.out)?;
    let d0 = s.initial_locations();
    let channels = match args.channels {
        Some(a) => {
            if a.len() != s.num_users() {
                return Err(CliError::Usage(format!(
                    "--channels lists {} entries for {} users",
                    a.len(),
                    s.num_users()
                )));
            }
            a
        }
        None => {
            let base = Profile::new(d0.clone(), vec![0; s.num_users()]);
            game::potential_maximizer(&s, &base, DeviationSpace::Channels, args.common.budget)?
                .0
                .channels
        }
    };
    let params = MobilityParams {
        gamma: args.chain.gamma,
        timer: args.chain.timer(),
        horizon: args.chain.horizon,
        budget: args.common.budget,
        ..MobilityParams::default()
    };
    let trace = mobility::run_mobility(&s, &channels, &params, SeedRoot(args.common.seed))?;
    let csv = write_csv(&args.common.out, "trace.csv", &chain_header(), &chain_rows(&trace))?;
    let stationary = match mobility::gibbs_distribution(&s, &channels, params.gamma, args.common.budget) {
        Ok(pi) => Some(json!({
            "total_variation": pi.total_variation(&trace.occupancy),
            "gibbs": pi.states.iter().zip(&pi.probabilities)
                .map(|(d, p)| json!({ "state": d, "probability": p }))
                .collect::<Vec<_>>(),
        })),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "command": "mobility",
        "seed": args.common.seed,
        "params": params,
        "channels": channels,
        "events": trace.event_count,
        "accepted": trace.accepted_count,
        "final_profile": trace.final_profile,
        "time_average_utility": trace.time_average_utility,
        "time_average_potential": trace.time_average_potential,
        "occupancy": occupancy_json(&trace.occupancy),
        "stationary": stationary,
    });
    let summary = write_json(&args.common.out, "summary.json", &summary)?;
    Ok(vec![csv, summary])
}

fn joint(args: JointArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_scenario(&args.common.scenario)?;
    prepare_out(&args.common.out)?;
    let params = MobilityParams {
        gamma: args.chain.gamma,
        timer: args.chain.timer(),
        horizon: args.chain.horizon,
        channel_oracle: match args.mode {
            OracleKind::Exact => ChannelOracle::ExactArgmax,
            OracleKind::Learning => ChannelOracle::Learning,
        },
        learning: args.learning.params(),
        budget: args.common.budget,
        record_events: true,
    };
    let trace = mobility::run_joint(&s, &params, SeedRoot(args.common.seed))?;
    let csv = write_csv(&args.common.out, "trace.csv", &chain_header(), &chain_rows(&trace))?;
    let final_total = game::total_utility(&s, &trace.final_profile);
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    let loss = match game::centralized_optimum(&s, &base, DeviationSpace::Joint, args.common.budget) {
        Ok((opt, value)) => {
            let norm = UtilityNormalization::exact_for_joint(&s, DEFAULT_FLOOR)?;
            Some(json!({
                "optimum": opt,
                "final": analysis::performance_loss_report(final_total, value, s.num_users(), &norm),
                "time_average": analysis::performance_loss_report(trace.time_average_utility, value, s.num_users(), &norm),
            }))
        }
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "command": "joint",
        "seed": args.common.seed,
        "params": params,
        "events": trace.event_count,
        "accepted": trace.accepted_count,
        "final_profile": trace.final_profile,
        "is_nash": game::is_nash(&s, &trace.final_profile, DeviationSpace::Joint),
        "late_modal_locations": trace.late_modal_state(),
        "time_average_utility": trace.time_average_utility,
        "time_average_potential": trace.time_average_potential,
        "performance_loss": loss,
    });
    let summary = write_json(&args.common.out, "summary.json", &summary)?;
    Ok(vec![csv, summary])
}

fn analyze(args: AnalyzeArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_scenario(&args.common.scenario)?;
    prepare_out(&args.common.out)?;
    let d = s.initial_locations();
    let norm = if args.normalized {
        Some(UtilityNormalization::exact_for_channels(&s, &d, DEFAULT_FLOOR)?)
    } else {
        None
    };
    let report = analysis::poa(&s, &d, args.common.budget, norm)?;
    let joint = match analysis::joint_poa(&s, args.common.budget) {
        Ok(r) => Some(r),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "command": "analyze",
        "channel_game": report,
        "joint_game": joint,
    });
    Ok(vec![write_json(&args.common.out, "report.json", &summary)?])
}

fn enumerate(args: EnumerateArgs) -> CliResult<Vec<PathBuf>> {
    let s = load_scenario(&args.common.scenario)?;
    prepare_out(&args.common.out)?;
    let space: DeviationSpace = args.space.into();
    let base = Profile::new(s.initial_locations(), vec![0; s.num_users()]);
    let nash = game::enumerate_nash(&s, &base, space, args.common.budget)?;
    let (opt, opt_value) = game::centralized_optimum(&s, &base, space, args.common.budget)?;
    let (pmax, pmax_value) = game::potential_maximizer(&s, &base, space, args.common.budget)?;
    let n = s.num_users();
    let mut header: Vec<String> = (0..n).map(|k| format!("location_{k}")).collect();
    header.extend((0..n).map(|k| format!("channel_{k}")));
    header.push("total_utility".into());
    header.push("phi".into());
    let rows: Vec<Vec<String>> = nash
        .iter()
        .map(|p| {
            let mut row: Vec<String> = p.locations.iter().map(|d| d.to_string()).collect();
            row.extend(p.channels.iter().map(|c| c.to_string()));
            row.push(fmt_float(game::total_utility(&s, p)));
            row.push(fmt_float(game::potential(&s, p)));
            row
        })
        .collect();
    let csv = write_csv(&args.common.out, "nash.csv", &header, &rows)?;
    let summary = json!({
        "command": "enumerate",
        "space": space,
        "profiles": game::profile_space_size(&s, &base, space).to_string(),
        "nash_count": nash.len(),
        "optimum": { "profile": opt, "total_utility": opt_value },
        "potential_maximizer": { "profile": pmax, "phi": pmax_value },
    });
    let summary = write_json(&args.common.out, "summary.json", &summary)?;
    Ok(vec![csv, summary])
}

fn generate(args: GenerateArgs) -> CliResult<Vec<PathBuf>> {
    let preset: Preset = args.preset.parse().map_err(|_| {
        let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        CliError::Usage(format!(
            "unknown preset `{}` (known: {})",
            args.preset,
            known.join(", ")
        ))
    })?;
    let options = PresetOptions {
        users: args.users,
        channels: args.channels,
        ring_reach: args.ring_reach,
        edge_probability: args.edge_probability,
        side: args.side,
        range: args.range,
        grid_rows: args.grid_rows,
        grid_cols: args.grid_cols,
        obstacles: args.obstacles,
        timer_density: args.timer_density,
        graph: args.graph.map(|g| match g {
            GraphKind::Ring => NineNodeGraph::Ring,
            GraphKind::Circulant => NineNodeGraph::Circulant,
            GraphKind::Lattice => NineNodeGraph::Lattice,
            GraphKind::Random => NineNodeGraph::Random,
        }),
    };
    let cfg = presets::generate(preset, &options, SeedRoot(args.seed))?;
    prepare_out(&args.out)?;
    let path = args.out.join("scenario.toml");
    fs::write(&path, cfg.to_toml()).map_err(io_err(&path))?;
    Ok(vec![path])
}
