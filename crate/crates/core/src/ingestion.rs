//! Scenario files and the synthetic scenario generator.
//!
//! Scenarios are long-layout CSV with header
//! `interval,prosumer_id,generation_kwh,demand_kwh`, one row per prosumer per
//! interval, energies in kWh. Rows may appear in any order; each prosumer
//! must cover intervals `0..T` exactly once.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_profiles, EnergyProfile, IntervalEnergy, ProsumerId, DEFAULT_INTERVAL_MINUTES};

pub const CSV_HEADER: [&str; 4] = ["interval", "prosumer_id", "generation_kwh", "demand_kwh"];

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    interval: usize,
    prosumer_id: u32,
    generation_kwh: f64,
    demand_kwh: f64,
}

/// Loads a scenario file using the default 15-minute interval length.
pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<EnergyProfile>> {
    load_profiles_with(path, DEFAULT_INTERVAL_MINUTES)
}

pub fn load_profiles_with(path: impl AsRef<Path>, interval_minutes: u32) -> Result<Vec<EnergyProfile>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    read_profiles(file, path, interval_minutes)
}

/// Parses scenario CSV from any reader. `source` is only used in error messages.
pub fn read_profiles<R: Read>(reader: R, source: &Path, interval_minutes: u32) -> Result<Vec<EnergyProfile>> {
    let parse_err = |line: u64, column: &str, message: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        column: column.to_string(),
        message,
    };

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(parse_err(1, "-", e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoProsumers);
    }
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            "-",
            format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut by_prosumer: BTreeMap<ProsumerId, BTreeMap<usize, IntervalEnergy>> = BTreeMap::new();
    for result in rdr.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, "-", csv_message(&e))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record.deserialize(Some(&headers)).map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|f| CSV_HEADER.get(f as usize))
                    .copied()
                    .unwrap_or("-"),
                _ => "-",
            };
            parse_err(line, column, csv_message(&e))
        })?;
        for (column, value) in [("generation_kwh", row.generation_kwh), ("demand_kwh", row.demand_kwh)] {
            if !value.is_finite() {
                return Err(parse_err(line, column, format!("non-finite value {value}")));
            }
            if value < 0.0 {
                return Err(Error::NegativeCell {
                    path: source.to_path_buf(),
                    line,
                    column,
                    value,
                });
            }
        }
        let prosumer = ProsumerId(row.prosumer_id);
        let energy = IntervalEnergy::new(row.generation_kwh, row.demand_kwh);
        if by_prosumer
            .entry(prosumer)
            .or_default()
            .insert(row.interval, energy)
            .is_some()
        {
            return Err(Error::DuplicateRow {
                path: source.to_path_buf(),
                prosumer,
                interval: row.interval,
                line,
            });
        }
    }

    if by_prosumer.is_empty() {
        return Err(Error::NoProsumers);
    }

    let mut profiles = Vec::with_capacity(by_prosumer.len());
    for (prosumer, rows) in by_prosumer {
        let mut intervals = Vec::with_capacity(rows.len());
        for (expected, (found, energy)) in rows.into_iter().enumerate() {
            if expected != found {
                return Err(Error::Misaligned {
                    path: source.to_path_buf(),
                    prosumer,
                    expected,
                    found,
                });
            }
            intervals.push(energy);
        }
        profiles.push(EnergyProfile::new(prosumer, intervals).with_interval_minutes(interval_minutes));
    }
    validate_profiles(&profiles)?;
    Ok(profiles)
}

fn csv_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    }
}

/// Writes profiles in interval-major order (all prosumers for interval 0,
/// then interval 1, ...).
pub fn write_profiles<W: Write>(writer: W, profiles: &[EnergyProfile]) -> Result<()> {
    validate_profiles(profiles)?;
    let mut wtr = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::io(PathBuf::from("<csv>"), io::Error::other(e));
    wtr.write_record(CSV_HEADER).map_err(to_err)?;
    for t in 0..profiles[0].len() {
        for p in profiles {
            let e = p.intervals[t];
            wtr.write_record([
                t.to_string(),
                p.prosumer.to_string(),
                e.generation.to_string(),
                e.demand.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn save_profiles(path: impl AsRef<Path>, profiles: &[EnergyProfile]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_profiles(io::BufWriter::new(file), profiles).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Summer,
    Winter,
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Season::Summer => "summer",
            Season::Winter => "winter",
        })
    }
}

impl FromStr for Season {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "winter" => Ok(Season::Winter),
            other => Err(format!("unknown season `{other}` (expected summer or winter)")),
        }
    }
}

/// Parameters for [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub prosumers: usize,
    pub intervals: usize,
    pub interval_minutes: u32,
    /// Installed solar capacity per prosumer, kWp.
    pub capacity_kwp: f64,
    pub season: Season,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            prosumers: 5,
            intervals: 96,
            interval_minutes: DEFAULT_INTERVAL_MINUTES,
            capacity_kwp: 3.0,
            season: Season::Summer,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prosumers == 0 {
            return Err(Error::InvalidConfig("prosumers must be positive".into()));
        }
        if self.intervals == 0 {
            return Err(Error::InvalidConfig("intervals must be positive".into()));
        }
        if self.interval_minutes == 0 || 1440 % self.interval_minutes != 0 {
            return Err(Error::InvalidConfig(format!(
                "interval_minutes must divide a day evenly, got {}",
                self.interval_minutes
            )));
        }
        if !(self.capacity_kwp.is_finite() && self.capacity_kwp >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "capacity_kwp must be non-negative, got {}",
                self.capacity_kwp
            )));
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            let bad = |what: &str| Error::Config {
                line,
                message: format!("invalid {what} `{value}`"),
            };
            match key {
                "prosumers" => cfg.prosumers = value.parse().map_err(|_| bad("prosumers"))?,
                "intervals" => cfg.intervals = value.parse().map_err(|_| bad("intervals"))?,
                "interval_minutes" => cfg.interval_minutes = value.parse().map_err(|_| bad("interval_minutes"))?,
                "capacity_kwp" => cfg.capacity_kwp = value.parse().map_err(|_| bad("capacity_kwp"))?,
                "season" => cfg.season = value.parse().map_err(|_| bad("season"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        format!(
            "prosumers = {}\nintervals = {}\ninterval_minutes = {}\ncapacity_kwp = {}\nseason = {}\nseed = {}\n",
            self.prosumers, self.intervals, self.interval_minutes, self.capacity_kwp, self.season, self.seed
        )
    }
}

struct SolarSeason {
    sunrise: f64,
    sunset: f64,
    /// Fraction of nameplate reached at solar noon on a clear day.
    peak: f64,
    /// Bell width, hours.
    sigma: f64,
}

impl Season {
    fn solar(self) -> SolarSeason {
        match self {
            Season::Summer => SolarSeason {
                sunrise: 5.0,
                sunset: 19.0,
                peak: 1.0,
                sigma: 2.8,
            },
            Season::Winter => SolarSeason {
                sunrise: 6.5,
                sunset: 17.0,
                peak: 0.65,
                sigma: 2.0,
            },
        }
    }

    /// Multiplier on the morning and evening peaks (heating in winter).
    fn peak_factor(self) -> f64 {
        match self {
            Season::Summer => 1.0,
            Season::Winter => 1.3,
        }
    }

    /// Upper bound of the daytime load drawn per household (cooling in summer).
    fn daytime_kw_max(self) -> f64 {
        match self {
            Season::Summer => 3.2,
            Season::Winter => 1.0,
        }
    }
}

/// Clear-sky output fraction at hour-of-day `hour`: a Gaussian bell centred
/// on solar noon, shifted and rescaled so it reaches zero at sunrise and
/// sunset and one at noon.
fn solar_shape(hour: f64, s: &SolarSeason) -> f64 {
    if hour <= s.sunrise || hour >= s.sunset {
        return 0.0;
    }
    let noon = (s.sunrise + s.sunset) / 2.0;
    let half = (s.sunset - s.sunrise) / 2.0;
    let bell = |x: f64| (-(x * x) / (2.0 * s.sigma * s.sigma)).exp();
    let edge = bell(half);
    ((bell(hour - noon) - edge) / (1.0 - edge)).max(0.0)
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    let x = (hour - centre) / width;
    (-0.5 * x * x).exp()
}

/// Load shape of one household, drawn once per prosumer.
struct Household {
    base_kw: f64,
    morning_kw: f64,
    morning_at: f64,
    evening_kw: f64,
    evening_at: f64,
    daytime_kw: f64,
    daytime_at: f64,
}

impl Household {
    fn draw(rng: &mut ChaCha8Rng, season: Season) -> Self {
        let peak = season.peak_factor();
        Self {
            base_kw: rng.gen_range(0.15..0.55),
            morning_kw: peak * rng.gen_range(0.5..1.6),
            morning_at: rng.gen_range(6.5..8.5),
            evening_kw: peak * rng.gen_range(1.0..2.6),
            evening_at: rng.gen_range(17.5..20.5),
            daytime_kw: rng.gen_range(0.0..season.daytime_kw_max()),
            daytime_at: rng.gen_range(11.0..16.0),
        }
    }

    fn power_kw(&self, hour: f64) -> f64 {
        // wrap the evening bump past midnight so late peaks taper smoothly
        let evening = bump(hour, self.evening_at, 1.8) + bump(hour + 24.0, self.evening_at, 1.8);
        self.base_kw
            + self.morning_kw * bump(hour, self.morning_at, 1.1)
            + self.evening_kw * evening
            + self.daytime_kw * bump(hour, self.daytime_at, 2.2)
    }
}

/// Generates a reproducible scenario: every prosumer sees the same solar
/// trace (one location, same panel size), scaled so a clear summer noon
/// yields `capacity_kwp * interval_hours`; demand follows a per-household
/// double-peak curve with seeded noise and occasional appliance spikes.
///
/// Prosumer `k`'s profile depends only on `seed`, `k` and the season, so
/// raising `prosumers` extends a scenario without changing existing members.
pub fn generate_synthetic(config: &ScenarioConfig) -> Result<Vec<EnergyProfile>> {
    config.validate()?;
    let hours = f64::from(config.interval_minutes) / 60.0;
    let per_day = (1440 / config.interval_minutes) as usize;
    let days = config.intervals.div_ceil(per_day);
    let solar = config.season.solar();

    let mut weather = ChaCha8Rng::seed_from_u64(config.seed);
    weather.set_stream(u64::MAX);
    let clearness: Vec<f64> = (0..days).map(|_| weather.gen_range(0.85..1.0)).collect();

    let generation: Vec<f64> = (0..config.intervals)
        .map(|t| {
            let hour = ((t % per_day) as f64 + 0.5) * hours;
            let day = t / per_day;
            config.capacity_kwp * hours * solar.peak * clearness[day] * solar_shape(hour, &solar)
        })
        .collect();

    let profiles = (0..config.prosumers)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let house = Household::draw(&mut rng, config.season);
            let intervals = generation
                .iter()
                .enumerate()
                .map(|(t, &gen)| {
                    let hour = ((t % per_day) as f64 + 0.5) * hours;
                    let noise = rng.gen_range(0.75..1.25);
                    let spike = if rng.gen_bool(0.06) {
                        rng.gen_range(0.5..2.0)
                    } else {
                        0.0
                    };
                    let kw = house.power_kw(hour) * noise + spike;
                    IntervalEnergy::new(gen, kw * hours)
                })
                .collect();
            EnergyProfile::new(ProsumerId(k as u32 + 1), intervals).with_interval_minutes(config.interval_minutes)
        })
        .collect::<Vec<_>>();
    debug_assert!(validate_profiles(&profiles).is_ok());
    Ok(profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Vec<EnergyProfile>> {
        read_profiles(Cursor::new(text), Path::new("test.csv"), 15)
    }

    #[test]
    fn parses_long_layout_in_any_order() {
        let text = "interval,prosumer_id,generation_kwh,demand_kwh\n\
                    1,2,0.5,0.1\n0,1,0.0,0.3\n0,2,0.2,0.2\n1,1,1.0,0.4\n";
        let p = parse(text).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].prosumer, ProsumerId(1));
        assert_eq!(
            p[0].intervals,
            vec![IntervalEnergy::new(0.0, 0.3), IntervalEnergy::new(1.0, 0.4)]
        );
        assert_eq!(p[1].intervals[1], IntervalEnergy::new(0.5, 0.1));
    }

    #[test]
    fn negative_cell_cites_row_and_column() {
        let text = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0.0,0.3\n0,2,0.1,-0.2\n";
        match parse(text).unwrap_err() {
            Error::NegativeCell { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "demand_kwh");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_row_cites_row_and_column() {
        let text = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0.0,0.3\n1,1,abc,0.3\n";
        match parse(text).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "generation_kwh");
            }
            other => panic!("unexpected {other}"),
        }
        let short = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0.0\n";
        assert!(matches!(parse(short), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_file_has_no_prosumers() {
        assert!(matches!(parse(""), Err(Error::NoProsumers)));
        assert!(matches!(
            parse("interval,prosumer_id,generation_kwh,demand_kwh\n"),
            Err(Error::NoProsumers)
        ));
        assert_eq!(parse("").unwrap_err().to_string(), "no prosumers");
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            parse("t,id,g,d\n0,1,0,0\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn misaligned_and_duplicate_rows() {
        let gap = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0,0\n2,1,0,0\n";
        assert!(matches!(
            parse(gap),
            Err(Error::Misaligned {
                expected: 1,
                found: 2,
                ..
            })
        ));
        let dup = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0,0\n0,1,0,0\n";
        assert!(matches!(parse(dup), Err(Error::DuplicateRow { line: 3, .. })));
        let ragged = "interval,prosumer_id,generation_kwh,demand_kwh\n0,1,0,0\n1,1,0,0\n0,2,0,0\n";
        assert!(matches!(parse(ragged), Err(Error::RaggedProfiles { .. })));
    }

    #[test]
    fn missing_file_is_distinct() {
        assert!(matches!(
            load_profiles("/nonexistent/scenario.csv"),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn config_parsing() {
        let cfg = ScenarioConfig::parse(
            "# bundled\nprosumers = 7\nintervals=48\ninterval_minutes = 30\ncapacity_kwp = 2.5\nseason = \"winter\"\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.prosumers, 7);
        assert_eq!(cfg.intervals, 48);
        assert_eq!(cfg.interval_minutes, 30);
        assert_eq!(cfg.capacity_kwp, 2.5);
        assert_eq!(cfg.season, Season::Winter);
        assert_eq!(cfg.seed, 9);
        assert_eq!(ScenarioConfig::parse(&cfg.to_text()).unwrap(), cfg);

        assert!(matches!(
            ScenarioConfig::parse("colour = red"),
            Err(Error::Config { line: 1, .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse("\nseed = x"),
            Err(Error::Config { line: 2, .. })
        ));
        assert!(ScenarioConfig::parse("prosumers = 0").is_err());
        assert!(ScenarioConfig::parse("capacity_kwp = -1").is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = ScenarioConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = ScenarioConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn summer_generates_more_than_winter() {
        let summer = ScenarioConfig {
            seed: 3,
            ..Default::default()
        };
        let winter = ScenarioConfig {
            season: Season::Winter,
            ..summer.clone()
        };
        let total = |c: &ScenarioConfig| -> f64 {
            generate_synthetic(c)
                .unwrap()
                .iter()
                .map(|p| p.total_generation())
                .sum()
        };
        assert!(total(&summer) > total(&winter));
    }

    #[test]
    fn zero_capacity_means_no_generation() {
        let cfg = ScenarioConfig {
            capacity_kwp: 0.0,
            ..Default::default()
        };
        let profiles = generate_synthetic(&cfg).unwrap();
        assert!(profiles.iter().flat_map(|p| &p.intervals).all(|e| e.generation == 0.0));
    }

    #[test]
    fn solar_peak_is_bounded_by_capacity() {
        let cfg = ScenarioConfig::default();
        let profiles = generate_synthetic(&cfg).unwrap();
        let peak = profiles[0].intervals.iter().map(|e| e.generation).fold(0.0, f64::max);
        let limit = cfg.capacity_kwp * 0.25;
        assert!(peak <= limit && peak > 0.8 * limit, "peak {peak}");
        // night stays dark
        assert_eq!(profiles[0].intervals[0].generation, 0.0);
        assert_eq!(profiles[0].intervals[95].generation, 0.0);
    }

    #[test]
    fn larger_scenarios_extend_smaller_ones() {
        let small = ScenarioConfig {
            seed: 5,
            ..Default::default()
        };
        let big = ScenarioConfig {
            prosumers: 12,
            ..small.clone()
        };
        let a = generate_synthetic(&small).unwrap();
        let b = generate_synthetic(&big).unwrap();
        assert_eq!(a[..], b[..5]);
    }

    #[test]
    fn write_then_read_round_trips() {
        let profiles = generate_synthetic(&ScenarioConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_profiles(&mut buf, &profiles).unwrap();
        let back = read_profiles(Cursor::new(&buf), Path::new("mem"), 15).unwrap();
        assert_eq!(back, profiles);
        let mut again = Vec::new();
        write_profiles(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }
}
