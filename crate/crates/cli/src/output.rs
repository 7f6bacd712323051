//! CSV and text writers for command outputs.
//!
//! Machine CSVs carry full `f64` precision (shortest round-trip form); the
//! human-readable `*.txt` tables round to two decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use peertrade_core::coalition::{Allocation, CoalitionGame, CoreReport};
use peertrade_core::market::SimulationResult;
use peertrade_core::model::ProsumerId;
use peertrade_core::report::{ComparisonReport, ScalingRow};

use crate::CliError;

/// Formats a float for machine output; negative zero prints as `0`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        x.to_string()
    }
}

pub fn members(ids: &[ProsumerId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub(crate) struct Table {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub(crate) fn new(path: impl Into<PathBuf>, header: &[&str]) -> Result<Self, CliError> {
        let mut t = Self {
            path: path.into(),
            writer: csv::Writer::from_writer(Vec::new()),
        };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    pub(crate) fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<(), CliError> {
        self.writer
            .write_record(fields.into_iter().collect::<Vec<_>>())
            .map_err(|e| CliError::runtime(format!("{}: {e}", self.path.display())))
    }

    pub(crate) fn finish(self) -> Result<PathBuf, CliError> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::runtime(format!("{}: {e}", self.path.display())))?;
        write_file(&self.path, &bytes)?;
        Ok(self.path)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// `clearings.csv`: one row per prosumer per interval with the interval's
/// quote and grid exchange repeated on each row.
pub fn write_clearings(dir: &Path, result: &SimulationResult) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("clearings.csv"),
        &[
            "interval",
            "scenario",
            "p2p_sell_price",
            "p2p_buy_price",
            "total_surplus_kwh",
            "total_deficit_kwh",
            "grid_export_kwh",
            "grid_import_kwh",
            "grid_cash_cents",
            "prosumer_id",
            "role",
            "quantity_kwh",
            "matched_kwh",
            "p2p_cash_cents",
            "fit_cash_cents",
        ],
    )?;
    for (clearing, fit) in result.clearings.iter().zip(&result.fit) {
        let (scenario, sell, buy) = match clearing.quote {
            Some(q) => (q.scenario.to_string(), num(q.sell), num(q.buy)),
            None => ("none".to_string(), String::new(), String::new()),
        };
        for (s, (_, fit_cash)) in clearing.settlements.iter().zip(&fit.cash) {
            t.row([
                clearing.interval.to_string(),
                scenario.clone(),
                sell.clone(),
                buy.clone(),
                num(clearing.total_surplus),
                num(clearing.total_deficit),
                num(clearing.grid_export),
                num(clearing.grid_import),
                num(clearing.grid_cash),
                s.prosumer.to_string(),
                s.role.to_string(),
                num(s.quantity),
                num(s.matched),
                num(s.cash),
                num(*fit_cash),
            ])?;
        }
    }
    t.finish()
}

pub fn write_summary(dir: &Path, result: &SimulationResult) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("summary.csv"),
        &[
            "prosumer_id",
            "generation_kwh",
            "demand_kwh",
            "p2p_cost_cents",
            "fit_cost_cents",
            "savings_cents",
        ],
    )?;
    for p in &result.prosumers {
        t.row([
            p.prosumer.to_string(),
            num(p.generation),
            num(p.demand),
            num(p.p2p_cost),
            num(p.fit_cost),
            num(p.savings()),
        ])?;
    }
    t.finish()
}

pub fn write_co2_series(dir: &Path, result: &SimulationResult) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("co2_series.csv"),
        &[
            "interval",
            "p2p_grid_import_kwh",
            "fit_grid_import_kwh",
            "p2p_co2_kg",
            "fit_co2_kg",
        ],
    )?;
    for e in &result.emissions {
        t.row([
            e.interval.to_string(),
            num(e.p2p_import),
            num(e.fit_import),
            num(e.p2p_kg),
            num(e.fit_kg),
        ])?;
    }
    t.finish()
}

pub fn write_comparison(dir: &Path, report: &ComparisonReport) -> Result<Vec<PathBuf>, CliError> {
    let mut savings = Table::new(
        dir.join("savings.csv"),
        &["prosumer_id", "fit_cost_cents", "p2p_cost_cents", "savings_cents"],
    )?;
    for p in &report.prosumers {
        savings.row([p.prosumer.to_string(), num(p.fit_cost), num(p.p2p_cost), num(p.savings)])?;
    }

    let mut daily = Table::new(
        dir.join("daily.csv"),
        &[
            "day",
            "fit_cost_cents",
            "p2p_cost_cents",
            "savings_per_prosumer_cents",
            "cost_reduction_pct",
            "fit_co2_kg",
            "p2p_co2_kg",
            "co2_saved_per_prosumer_kg",
            "co2_reduction_pct",
        ],
    )?;
    for d in &report.days {
        daily.row([
            (d.day + 1).to_string(),
            num(d.fit_cost),
            num(d.p2p_cost),
            num(d.savings_per_prosumer),
            num(d.cost_reduction_pct),
            num(d.fit_kg),
            num(d.p2p_kg),
            num(d.co2_saved_per_prosumer_kg),
            num(d.co2_reduction_pct),
        ])?;
    }

    let mut series = Table::new(
        dir.join("co2_series.csv"),
        &[
            "interval",
            "p2p_grid_import_kwh",
            "fit_grid_import_kwh",
            "p2p_co2_kg",
            "fit_co2_kg",
        ],
    )?;
    for e in &report.co2_series {
        series.row([
            e.interval.to_string(),
            num(e.p2p_import),
            num(e.fit_import),
            num(e.p2p_kg),
            num(e.fit_kg),
        ])?;
    }
    Ok(vec![savings.finish()?, daily.finish()?, series.finish()?])
}

pub fn write_scaling(dir: &Path, rows: &[(String, ScalingRow)]) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("scaling.csv"),
        &[
            "scenario",
            "prosumers",
            "total_savings_cents",
            "total_savings_dollars",
            "co2_saved_kg",
        ],
    )?;
    for (label, row) in rows {
        t.row([
            label.clone(),
            row.prosumers.to_string(),
            num(row.total_savings_cents),
            num(row.total_savings_dollars()),
            num(row.co2_saved_kg),
        ])?;
    }
    t.finish()
}

/// Plain-text tables in the layout of the usual results tables.
pub fn render_report(reports: &[(String, ComparisonReport)], scaling: &[(String, ScalingRow)]) -> String {
    let mut out = String::new();
    let labels: Vec<&str> = reports.iter().map(|(l, _)| l.as_str()).collect();

    let _ = writeln!(out, "Cost savings per prosumer, P2P vs FiT (cents)");
    let _ = write!(out, "{:<10}", "prosumer");
    for l in &labels {
        let _ = write!(out, " {:>14}", l);
    }
    out.push('\n');
    let mut ids: Vec<ProsumerId> = reports
        .iter()
        .flat_map(|(_, r)| r.prosumers.iter().map(|p| p.prosumer))
        .collect();
    ids.sort();
    ids.dedup();
    for id in ids {
        let _ = write!(out, "{:<10}", id.to_string());
        for (_, r) in reports {
            match r.prosumers.iter().find(|p| p.prosumer == id) {
                Some(p) => {
                    let _ = write!(out, " {:>14.2}", p.savings);
                }
                None => {
                    let _ = write!(out, " {:>14}", "-");
                }
            }
        }
        out.push('\n');
    }

    let _ = writeln!(out, "\nCO2 and cost reduction");
    let _ = writeln!(
        out,
        "{:<16} {:>14} {:>14} {:>12} {:>14} {:>12}",
        "scenario", "fit_co2_kg", "p2p_co2_kg", "co2_red_%", "savings_c", "cost_red_%"
    );
    for (label, r) in reports {
        let fit_kg: f64 = r.co2_series.iter().map(|e| e.fit_kg).sum();
        let p2p_kg: f64 = r.co2_series.iter().map(|e| e.p2p_kg).sum();
        let _ = writeln!(
            out,
            "{:<16} {:>14.2} {:>14.2} {:>12.2} {:>14.2} {:>12.2}",
            label, fit_kg, p2p_kg, r.co2_reduction_pct, r.total_savings, r.cost_reduction_pct
        );
    }

    for (label, r) in reports {
        let _ = writeln!(out, "\nDaily averages per prosumer: {label}");
        let _ = writeln!(
            out,
            "{:<6} {:>16} {:>12} {:>16} {:>12}",
            "day", "co2_saved_kg", "co2_red_%", "savings_c", "cost_red_%"
        );
        for d in &r.days {
            let _ = writeln!(
                out,
                "{:<6} {:>16.2} {:>12.2} {:>16.2} {:>12.2}",
                d.day + 1,
                d.co2_saved_per_prosumer_kg,
                d.co2_reduction_pct,
                d.savings_per_prosumer,
                d.cost_reduction_pct
            );
        }
    }

    if !scaling.is_empty() {
        let _ = writeln!(out, "\nTotal savings by community size");
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>14} {:>14}",
            "scenario", "prosumers", "savings_$", "co2_saved_kg"
        );
        for (label, row) in scaling {
            let _ = writeln!(
                out,
                "{:<24} {:>10} {:>14.2} {:>14.2}",
                label,
                row.prosumers,
                row.total_savings_dollars(),
                row.co2_saved_kg
            );
        }
    }
    out
}

pub fn write_coalition_values(dir: &Path, game: &CoalitionGame, values: &[f64]) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("coalition_values.csv"),
        &["coalition", "members", "size", "net_kwh", "value_cents"],
    )?;
    for (mask, value) in values.iter().enumerate() {
        let c = peertrade_core::Coalition(mask as u32);
        let net: f64 = c.indices().map(|i| game.players()[i].1.net()).sum();
        t.row([
            mask.to_string(),
            members(&game.members(c)),
            c.len().to_string(),
            num(net),
            num(*value),
        ])?;
    }
    t.finish()
}

pub fn write_coalition_allocations(
    dir: &Path,
    game: &CoalitionGame,
    settlement: &Allocation,
    witness: &Allocation,
) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("coalition_allocations.csv"),
        &[
            "prosumer_id",
            "net_kwh",
            "standalone_value_cents",
            "settlement_cents",
            "witness_cents",
        ],
    )?;
    for (i, (id, pos)) in game.players().iter().enumerate() {
        t.row([
            id.to_string(),
            num(pos.net()),
            num(game.coalition_value(peertrade_core::Coalition(1 << i))),
            num(settlement.payoffs[i]),
            num(witness.payoffs[i]),
        ])?;
    }
    t.finish()
}

pub fn write_core_violations(dir: &Path, reports: &[(&str, &CoreReport)]) -> Result<PathBuf, CliError> {
    let mut t = Table::new(
        dir.join("coalition_core.csv"),
        &[
            "allocation",
            "coalition",
            "members",
            "value_cents",
            "allocated_cents",
            "shortfall_cents",
        ],
    )?;
    for (name, report) in reports {
        for v in &report.violations {
            t.row([
                name.to_string(),
                v.coalition.0.to_string(),
                members(&v.members),
                num(v.value),
                num(v.allocated),
                num(v.shortfall()),
            ])?;
        }
    }
    t.finish()
}
