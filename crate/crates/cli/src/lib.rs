//! `peertrade` command implementations.
//!
//! Each `cmd_*` function does the work of one subcommand and returns the
//! in-memory results alongside writing its files, so tests can check both.

pub mod output;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use peertrade_core::coalition::{CoalitionGame, CoreReport, SuperadditivityReport, DEFAULT_CORE_CAP};
use peertrade_core::ingestion::{self, generate_synthetic, ScenarioConfig, Season};
use peertrade_core::market::{simulate, SimulationResult};
use peertrade_core::model::{positions_at, EmissionsConfig, EnergyProfile, PriceConfig, DEFAULT_INTERVAL_MINUTES};
use peertrade_core::report::{compare, scaling_row, ComparisonReport, ScalingRow};
use peertrade_core::{Allocation, Error};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

/// `--prices <sell>,<buy>` in ¢/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricesArg(pub PriceConfig);

impl FromStr for PricesArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (sell, buy) = s
            .split_once(',')
            .ok_or_else(|| format!("expected <sell>,<buy>, got `{s}`"))?;
        let sell: f64 = sell
            .trim()
            .parse()
            .map_err(|_| format!("invalid sell price `{sell}`"))?;
        let buy: f64 = buy.trim().parse().map_err(|_| format!("invalid buy price `{buy}`"))?;
        PriceConfig::new(sell, buy).map(PricesArg).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "peertrade",
    version,
    about = "Peer-to-peer energy trading simulator with mid-market-rate pricing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct MarketOpts {
    /// Grid selling (retail) and buying (FiT) prices, ¢/kWh.
    #[arg(long, value_name = "SELL,BUY", default_value = "24.6,10")]
    pub prices: PricesArg,
    /// kg CO2 per kWh imported from the grid.
    #[arg(long = "co2-factor", value_name = "KG", default_value_t = 0.55)]
    pub co2_factor: f64,
    /// Length of one interval in the scenario file, minutes.
    #[arg(long = "interval-minutes", default_value_t = DEFAULT_INTERVAL_MINUTES)]
    pub interval_minutes: u32,
}

impl Default for MarketOpts {
    fn default() -> Self {
        Self {
            prices: PricesArg(PriceConfig::default()),
            co2_factor: EmissionsConfig::default().kg_per_kwh,
            interval_minutes: DEFAULT_INTERVAL_MINUTES,
        }
    }
}

impl MarketOpts {
    pub fn emissions(&self) -> Result<EmissionsConfig, CliError> {
        Ok(EmissionsConfig::new(self.co2_factor)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clear every interval of a scenario under P2P and FiT; write clearings,
    /// per-prosumer summary and CO2 series.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        market: MarketOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare P2P against FiT over one or more scenarios and write report tables.
    Compare {
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        market: MarketOpts,
        /// Also run synthetic scenarios with these prosumer counts, e.g. 5,10,15,20,25.
        #[arg(long, value_delimiter = ',')]
        scaling: Vec<usize>,
        /// Base generator config for --scaling runs.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        season: Option<Season>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Analyse one interval as a coalition game: value table, superadditivity,
    /// core membership of the settlement and a core witness.
    Coalition {
        scenario: PathBuf,
        #[arg(long)]
        interval: usize,
        #[arg(long = "core-cap", default_value_t = DEFAULT_CORE_CAP)]
        core_cap: usize,
        #[command(flatten)]
        market: MarketOpts,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write a synthetic scenario CSV.
    Generate {
        /// key = value generator config (prosumers, intervals, interval_minutes,
        /// capacity_kwp, season, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        prosumers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        season: Option<Season>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { scenario, market, out } => {
            let (result, files) = cmd_simulate(&scenario, &market, &out)?;
            Ok(format!(
                "simulated {} prosumers over {} intervals; wrote {}",
                result.prosumers.len(),
                result.intervals(),
                list(&files)
            ))
        }
        Command::Compare {
            scenarios,
            market,
            scaling,
            config,
            seed,
            season,
            out,
        } => {
            let base = generator_config(config.as_deref(), None, seed, season)?;
            let outcome = cmd_compare(&scenarios, &scaling, &base, &market, &out)?;
            Ok(outcome.text)
        }
        Command::Coalition {
            scenario,
            interval,
            core_cap,
            market,
            out,
        } => Ok(cmd_coalition(&scenario, interval, core_cap, &market, &out)?.text),
        Command::Generate {
            config,
            prosumers,
            seed,
            season,
            out,
        } => {
            let cfg = generator_config(config.as_deref(), prosumers, seed, season)?;
            let profiles = generate_synthetic(&cfg)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| CliError::runtime(format!("{}: {e}", parent.display())))?;
            }
            ingestion::save_profiles(&out, &profiles)?;
            Ok(format!(
                "wrote {} ({} prosumers, {} intervals)",
                out.display(),
                cfg.prosumers,
                cfg.intervals
            ))
        }
    }
}

fn list(files: &[PathBuf]) -> String {
    files
        .iter()
        .map(|f| f.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn generator_config(
    path: Option<&Path>,
    prosumers: Option<usize>,
    seed: Option<u64>,
    season: Option<Season>,
) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(n) = prosumers {
        cfg.prosumers = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = season {
        cfg.season = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(scenario: &Path, market: &MarketOpts) -> Result<Vec<EnergyProfile>, CliError> {
    Ok(ingestion::load_profiles_with(scenario, market.interval_minutes)?)
}

pub fn cmd_simulate(
    scenario: &Path,
    market: &MarketOpts,
    out: &Path,
) -> Result<(SimulationResult, Vec<PathBuf>), CliError> {
    let profiles = load(scenario, market)?;
    let result = simulate(&profiles, &market.prices.0, &market.emissions()?)?;
    let files = vec![
        output::write_clearings(out, &result)?,
        output::write_summary(out, &result)?,
        output::write_co2_series(out, &result)?,
    ];
    Ok((result, files))
}

pub struct CompareOutcome {
    pub reports: Vec<(String, ComparisonReport)>,
    pub scaling: Vec<(String, ScalingRow)>,
    pub files: Vec<PathBuf>,
    pub text: String,
}

/// Runs every scenario file plus one synthetic scenario per `scaling` count
/// (built from `base`). A scaling table is written whenever two or more
/// scenarios were run.
pub fn cmd_compare(
    scenarios: &[PathBuf],
    scaling: &[usize],
    base: &ScenarioConfig,
    market: &MarketOpts,
    out: &Path,
) -> Result<CompareOutcome, CliError> {
    if scenarios.is_empty() && scaling.is_empty() {
        return Err(CliError::validation(
            "compare needs at least one scenario file or --scaling count",
        ));
    }
    let emissions_cfg = market.emissions()?;
    let mut runs: Vec<(String, SimulationResult)> = Vec::new();
    let mut used = HashSet::new();
    for path in scenarios {
        let profiles = load(path, market)?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scenario")
            .to_string();
        let label = unique_label(&stem, &mut used);
        runs.push((label, simulate(&profiles, &market.prices.0, &emissions_cfg)?));
    }
    for &count in scaling {
        let cfg = ScenarioConfig {
            prosumers: count,
            ..base.clone()
        };
        let profiles = generate_synthetic(&cfg)?;
        let label = unique_label(&format!("synthetic-{}-n{count}", cfg.season), &mut used);
        runs.push((label, simulate(&profiles, &market.prices.0, &emissions_cfg)?));
    }

    let mut files = Vec::new();
    let mut reports = Vec::with_capacity(runs.len());
    for (label, result) in &runs {
        let report = compare(result);
        files.extend(output::write_comparison(&out.join(label), &report)?);
        reports.push((label.clone(), report));
    }
    let rows: Vec<(String, ScalingRow)> = if runs.len() > 1 {
        runs.iter().map(|(l, r)| (l.clone(), scaling_row(r))).collect()
    } else {
        Vec::new()
    };
    if !rows.is_empty() {
        files.push(output::write_scaling(out, &rows)?);
    }
    let text = output::render_report(&reports, &rows);
    let report_path = out.join("report.txt");
    output::write_file(&report_path, text.as_bytes())?;
    files.push(report_path);
    Ok(CompareOutcome {
        reports,
        scaling: rows,
        files,
        text,
    })
}

fn unique_label(stem: &str, used: &mut HashSet<String>) -> String {
    let mut label = stem.to_string();
    let mut k = 2;
    while !used.insert(label.clone()) {
        label = format!("{stem}-{k}");
        k += 1;
    }
    label
}

pub struct CoalitionOutcome {
    pub game: CoalitionGame,
    pub values: Vec<f64>,
    pub superadditivity: SuperadditivityReport,
    pub settlement: Allocation,
    pub settlement_core: CoreReport,
    pub witness: Allocation,
    pub witness_core: CoreReport,
    pub files: Vec<PathBuf>,
    pub text: String,
}

pub fn cmd_coalition(
    scenario: &Path,
    interval: usize,
    cap: usize,
    market: &MarketOpts,
    out: &Path,
) -> Result<CoalitionOutcome, CliError> {
    let profiles = load(scenario, market)?;
    let horizon = profiles[0].len();
    if interval >= horizon {
        return Err(CliError::validation(format!(
            "interval {interval} out of range: scenario has {horizon} intervals"
        )));
    }
    let game = CoalitionGame::new(positions_at(&profiles, interval)?, market.prices.0)?;
    let values = game.value_table(cap).map_err(|e| match e {
        Error::CapExceeded { players, cap } => CliError::validation(format!(
            "{players} players exceeds the brute-force cap of {cap}; core not checked (raise --core-cap)"
        )),
        other => other.into(),
    })?;
    let superadditivity = game.check_superadditive(cap)?;
    let settlement = game.settlement_allocation();
    let settlement_core = game.check_core(&settlement, cap)?;
    let witness = game.core_witness();
    let witness_core = game.check_core(&witness, cap)?;

    let files = vec![
        output::write_coalition_values(out, &game, &values)?,
        output::write_coalition_allocations(out, &game, &settlement, &witness)?,
        output::write_core_violations(out, &[("settlement", &settlement_core), ("witness", &witness_core)])?,
    ];

    let mut text = String::new();
    let _ = writeln!(text, "interval: {interval}");
    let _ = writeln!(text, "players: {}", game.len());
    let _ = writeln!(text, "grand coalition value: {:.2}", game.grand_value());
    let _ = writeln!(text, "superadditive: {}", yes_no(superadditivity.holds));
    if let Some(c) = &superadditivity.counterexample {
        let _ = writeln!(
            text,
            "  counterexample: {} + {}: {:.2} < {:.2}",
            output::members(&game.members(c.left)),
            output::members(&game.members(c.right)),
            c.union_value,
            c.separate_value
        );
    }
    let _ = writeln!(text, "disjoint pairs checked: {}", superadditivity.pairs_checked);
    let _ = writeln!(
        text,
        "settlement allocation in core: {} ({} violations)",
        yes_no(settlement_core.in_core),
        settlement_core.violations.len()
    );
    for v in &settlement_core.violations {
        let _ = writeln!(
            text,
            "  {{{}}}: allocated {:.2} < value {:.2}",
            output::members(&v.members),
            v.allocated,
            v.value
        );
    }
    let _ = writeln!(
        text,
        "witness allocation in core: {} ({} violations)",
        yes_no(witness_core.in_core),
        witness_core.violations.len()
    );
    let summary = out.join("coalition_summary.txt");
    output::write_file(&summary, text.as_bytes())?;
    let mut files = files;
    files.push(summary);

    Ok(CoalitionOutcome {
        game,
        values,
        superadditivity,
        settlement,
        settlement_core,
        witness,
        witness_core,
        files,
        text,
    })
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}
