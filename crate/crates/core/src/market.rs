//! Interval clearing and settlement for the P2P scheme and the FiT baseline.
//!
//! Every interval clears on its own: sellers are paid the uniform P2P selling
//! price for their whole surplus, buyers pay the uniform buying price for
//! their whole deficit, and the grid takes or supplies whatever is left.
//! Cash flows are signed from the prosumer's side (positive = received).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    positions_at, validate_profiles, EmissionsConfig, EnergyProfile, NetPosition, PriceConfig, ProsumerId, Role,
};
use crate::pricing::{quote, PriceQuote, QuoteError};

/// One prosumer's outcome in a P2P clearing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsumerSettlement {
    pub prosumer: ProsumerId,
    pub role: Role,
    /// Surplus sold or deficit bought, kWh.
    pub quantity: f64,
    /// Pro-rata share of the peer-matched volume, kWh. Reporting only.
    pub matched: f64,
    /// ¢, positive = received.
    pub cash: f64,
}

/// Market outcome of one interval under P2P trading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalClearing {
    pub interval: usize,
    /// `None` when every prosumer is idle.
    pub quote: Option<PriceQuote>,
    pub settlements: Vec<ProsumerSettlement>,
    pub total_surplus: f64,
    pub total_deficit: f64,
    pub grid_export: f64,
    pub grid_import: f64,
    /// ¢ received by the grid: retail on imports minus FiT paid on exports.
    pub grid_cash: f64,
}

impl IntervalClearing {
    /// Energy traded between peers, `min(S, D)`.
    pub fn matched(&self) -> f64 {
        self.total_surplus.min(self.total_deficit)
    }

    pub fn prosumer_cash_total(&self) -> f64 {
        self.settlements.iter().map(|s| s.cash).sum()
    }

    /// Prosumer cash plus grid cash; zero when money is conserved.
    pub fn budget_residual(&self) -> f64 {
        self.prosumer_cash_total() + self.grid_cash
    }
}

/// Clears one interval under mid-market-rate P2P pricing.
pub fn clear_interval(
    interval: usize,
    positions: &[(ProsumerId, NetPosition)],
    prices: &PriceConfig,
) -> Result<IntervalClearing> {
    let total_surplus: f64 = positions.iter().map(|(_, p)| p.surplus).sum();
    let total_deficit: f64 = positions.iter().map(|(_, p)| p.deficit).sum();

    let quote = match quote(prices, total_surplus, total_deficit) {
        Ok(q) => Some(q),
        Err(QuoteError::NoMarket) => None,
        Err(QuoteError::Invalid(e)) => return Err(e),
    };

    let matched = total_surplus.min(total_deficit);
    let settlements = positions
        .iter()
        .map(|&(prosumer, pos)| {
            let role = pos.role();
            let (quantity, matched, cash) = match (role, quote) {
                (Role::Seller, Some(q)) => (pos.surplus, pos.surplus * matched / total_surplus, q.sell * pos.surplus),
                (Role::Buyer, Some(q)) => (pos.deficit, pos.deficit * matched / total_deficit, -q.buy * pos.deficit),
                _ => (0.0, 0.0, 0.0),
            };
            ProsumerSettlement {
                prosumer,
                role,
                quantity,
                matched,
                cash,
            }
        })
        .collect();

    let grid_export = (total_surplus - total_deficit).max(0.0);
    let grid_import = (total_deficit - total_surplus).max(0.0);
    Ok(IntervalClearing {
        interval,
        quote,
        settlements,
        total_surplus,
        total_deficit,
        grid_export,
        grid_import,
        grid_cash: prices.grid_sell * grid_import - prices.grid_buy * grid_export,
    })
}

/// Outcome of one interval when every prosumer trades only with the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInterval {
    pub interval: usize,
    /// `(prosumer, cash ¢)` in input order.
    pub cash: Vec<(ProsumerId, f64)>,
    pub grid_export: f64,
    pub grid_import: f64,
}

/// Settles one interval under the feed-in tariff: exports earn the grid's
/// buy price and every deficit is bought at the retail price.
pub fn fit_interval(
    interval: usize,
    positions: &[(ProsumerId, NetPosition)],
    prices: &PriceConfig,
) -> Result<FitInterval> {
    prices.validate()?;
    let cash = positions
        .iter()
        .map(|&(id, pos)| (id, prices.grid_buy * pos.surplus - prices.grid_sell * pos.deficit))
        .collect();
    Ok(FitInterval {
        interval,
        cash,
        grid_export: positions.iter().map(|(_, p)| p.surplus).sum(),
        grid_import: positions.iter().map(|(_, p)| p.deficit).sum(),
    })
}

/// kg CO₂ from importing `grid_import` kWh.
pub fn emissions(grid_import: f64, config: &EmissionsConfig) -> f64 {
    debug_assert!(grid_import >= 0.0);
    grid_import * config.kg_per_kwh
}

/// Per-prosumer totals over a simulation horizon. Costs are ¢ paid (negative
/// when the prosumer earns more than it spends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsumerTotals {
    pub prosumer: ProsumerId,
    pub generation: f64,
    pub demand: f64,
    pub p2p_cost: f64,
    pub fit_cost: f64,
}

impl ProsumerTotals {
    /// FiT cost minus P2P cost.
    pub fn savings(&self) -> f64 {
        self.fit_cost - self.p2p_cost
    }
}

/// Grid imports and resulting CO₂ for one interval under both schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEmissions {
    pub interval: usize,
    pub p2p_import: f64,
    pub fit_import: f64,
    pub p2p_kg: f64,
    pub fit_kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub interval_minutes: u32,
    pub prices: PriceConfig,
    pub clearings: Vec<IntervalClearing>,
    pub fit: Vec<FitInterval>,
    pub prosumers: Vec<ProsumerTotals>,
    pub emissions: Vec<IntervalEmissions>,
}

impl SimulationResult {
    pub fn total_p2p_kg(&self) -> f64 {
        self.emissions.iter().map(|e| e.p2p_kg).sum()
    }

    pub fn total_fit_kg(&self) -> f64 {
        self.emissions.iter().map(|e| e.fit_kg).sum()
    }

    pub fn total_p2p_cost(&self) -> f64 {
        self.prosumers.iter().map(|p| p.p2p_cost).sum()
    }

    pub fn total_fit_cost(&self) -> f64 {
        self.prosumers.iter().map(|p| p.fit_cost).sum()
    }

    pub fn total_savings(&self) -> f64 {
        self.prosumers.iter().map(ProsumerTotals::savings).sum()
    }

    pub fn intervals(&self) -> usize {
        self.clearings.len()
    }
}

/// Runs both schemes over every interval of a validated scenario.
///
/// Totals are reduced in interval order, then profile order, so results are
/// bitwise reproducible.
pub fn simulate(
    profiles: &[EnergyProfile],
    prices: &PriceConfig,
    emissions_cfg: &EmissionsConfig,
) -> Result<SimulationResult> {
    validate_profiles(profiles)?;
    prices.validate()?;
    EmissionsConfig::new(emissions_cfg.kg_per_kwh)?;

    let horizon = profiles[0].len();
    let mut prosumers: Vec<ProsumerTotals> = profiles
        .iter()
        .map(|p| ProsumerTotals {
            prosumer: p.prosumer,
            generation: p.total_generation(),
            demand: p.total_demand(),
            p2p_cost: 0.0,
            fit_cost: 0.0,
        })
        .collect();
    let mut clearings = Vec::with_capacity(horizon);
    let mut fit = Vec::with_capacity(horizon);
    let mut series = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let positions = positions_at(profiles, t)?;
        let clearing = clear_interval(t, &positions, prices)?;
        let baseline = fit_interval(t, &positions, prices)?;
        for ((totals, settled), (_, fit_cash)) in prosumers.iter_mut().zip(&clearing.settlements).zip(&baseline.cash) {
            totals.p2p_cost -= settled.cash;
            totals.fit_cost -= fit_cash;
        }
        series.push(IntervalEmissions {
            interval: t,
            p2p_import: clearing.grid_import,
            fit_import: baseline.grid_import,
            p2p_kg: emissions(clearing.grid_import, emissions_cfg),
            fit_kg: emissions(baseline.grid_import, emissions_cfg),
        });
        clearings.push(clearing);
        fit.push(baseline);
    }

    Ok(SimulationResult {
        interval_minutes: profiles[0].interval_minutes,
        prices: *prices,
        clearings,
        fit,
        prosumers,
        emissions: series,
    })
}
