//! P2P-versus-FiT comparison figures: per-prosumer savings, per-day
//! averages, the CO₂ series and scaling rows.

use serde::{Deserialize, Serialize};

use crate::market::{IntervalEmissions, SimulationResult};
use crate::model::ProsumerId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsumerSavings {
    pub prosumer: ProsumerId,
    pub fit_cost: f64,
    pub p2p_cost: f64,
    pub savings: f64,
}

/// Aggregates for one calendar day of the horizon (the last day may be partial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySummary {
    pub day: usize,
    pub fit_cost: f64,
    pub p2p_cost: f64,
    pub savings_per_prosumer: f64,
    pub cost_reduction_pct: f64,
    pub fit_kg: f64,
    pub p2p_kg: f64,
    pub co2_saved_per_prosumer_kg: f64,
    pub co2_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub prosumers: Vec<ProsumerSavings>,
    pub days: Vec<DailySummary>,
    pub co2_series: Vec<IntervalEmissions>,
    pub total_savings: f64,
    pub total_co2_saved_kg: f64,
    pub co2_reduction_pct: f64,
    pub cost_reduction_pct: f64,
}

/// One row of a prosumer-count scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub prosumers: usize,
    pub total_savings_cents: f64,
    pub co2_saved_kg: f64,
}

impl ScalingRow {
    pub fn total_savings_dollars(&self) -> f64 {
        self.total_savings_cents / 100.0
    }
}

fn percent(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

/// Reduction percentages are taken against the FiT scheme's grid import:
/// CO₂ against FiT emissions, cost against the FiT retail bill
/// (`grid_sell * FiT import`). Both stay within `[0, 100]`.
pub fn compare(result: &SimulationResult) -> ComparisonReport {
    let prosumers: Vec<ProsumerSavings> = result
        .prosumers
        .iter()
        .map(|p| ProsumerSavings {
            prosumer: p.prosumer,
            fit_cost: p.fit_cost,
            p2p_cost: p.p2p_cost,
            savings: p.savings(),
        })
        .collect();
    let n = prosumers.len().max(1) as f64;
    let per_day = (1440 / result.interval_minutes.max(1)) as usize;
    let retail = result.prices.grid_sell;

    let days = result
        .clearings
        .chunks(per_day)
        .zip(result.fit.chunks(per_day))
        .zip(result.emissions.chunks(per_day))
        .enumerate()
        .map(|(day, ((clearings, fit), co2))| {
            let p2p_cost: f64 = -clearings.iter().map(|c| c.prosumer_cash_total()).sum::<f64>();
            let fit_cost: f64 = -fit.iter().flat_map(|f| f.cash.iter().map(|(_, c)| c)).sum::<f64>();
            let fit_bill: f64 = retail * fit.iter().map(|f| f.grid_import).sum::<f64>();
            let fit_kg: f64 = co2.iter().map(|e| e.fit_kg).sum();
            let p2p_kg: f64 = co2.iter().map(|e| e.p2p_kg).sum();
            DailySummary {
                day,
                fit_cost,
                p2p_cost,
                savings_per_prosumer: (fit_cost - p2p_cost) / n,
                cost_reduction_pct: percent(fit_cost - p2p_cost, fit_bill),
                fit_kg,
                p2p_kg,
                co2_saved_per_prosumer_kg: (fit_kg - p2p_kg) / n,
                co2_reduction_pct: percent(fit_kg - p2p_kg, fit_kg),
            }
        })
        .collect();

    let total_fit_kg = result.total_fit_kg();
    let total_co2_saved_kg = total_fit_kg - result.total_p2p_kg();
    let total_savings = result.total_savings();
    let fit_bill = retail * result.fit.iter().map(|f| f.grid_import).sum::<f64>();
    ComparisonReport {
        prosumers,
        days,
        co2_series: result.emissions.clone(),
        total_savings,
        total_co2_saved_kg,
        co2_reduction_pct: percent(total_co2_saved_kg, total_fit_kg),
        cost_reduction_pct: percent(total_savings, fit_bill),
    }
}

pub fn scaling_row(result: &SimulationResult) -> ScalingRow {
    ScalingRow {
        prosumers: result.prosumers.len(),
        total_savings_cents: result.total_savings(),
        co2_saved_kg: result.total_fit_kg() - result.total_p2p_kg(),
    }
}
