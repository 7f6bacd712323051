//! Domain types shared across the market, coalition and ingestion modules.
//!
//! Money is in cents (¢) and energy in kWh everywhere; nothing in the core
//! converts units.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for energy comparisons (kWh).
pub const ENERGY_TOL: f64 = 1e-9;

/// Default interval length in minutes.
pub const DEFAULT_INTERVAL_MINUTES: u32 = 15;

/// Ordinal identifier of a prosumer within one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProsumerId(pub u32);

impl fmt::Display for ProsumerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ProsumerId {
    fn from(id: u32) -> Self {
        ProsumerId(id)
    }
}

/// Metered generation and demand for one interval, in kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalEnergy {
    pub generation: f64,
    pub demand: f64,
}

impl IntervalEnergy {
    pub fn new(generation: f64, demand: f64) -> Self {
        Self { generation, demand }
    }
}

/// Time series of generation and demand for a single prosumer.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub prosumer: ProsumerId,
    pub intervals: Vec<IntervalEnergy>,
    pub interval_minutes: u32,
}

impl EnergyProfile {
    pub fn new(prosumer: ProsumerId, intervals: Vec<IntervalEnergy>) -> Self {
        Self {
            prosumer,
            intervals,
            interval_minutes: DEFAULT_INTERVAL_MINUTES,
        }
    }

    pub fn with_interval_minutes(mut self, minutes: u32) -> Self {
        self.interval_minutes = minutes;
        self
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn interval_hours(&self) -> f64 {
        f64::from(self.interval_minutes) / 60.0
    }

    /// Net position of this prosumer in interval `index`.
    pub fn net_position(&self, index: usize) -> Result<NetPosition> {
        let e = self.intervals[index];
        net_position(e.generation, e.demand).map_err(|err| match err {
            Error::NegativeInput { what, value } => Error::InvalidQuantity {
                prosumer: self.prosumer,
                interval: index,
                field: what,
                value,
            },
            other => other,
        })
    }

    pub fn total_generation(&self) -> f64 {
        self.intervals.iter().map(|e| e.generation).sum()
    }

    pub fn total_demand(&self) -> f64 {
        self.intervals.iter().map(|e| e.demand).sum()
    }
}

/// Surplus and deficit of one prosumer for one interval after self-consumption.
///
/// At most one of the two fields is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetPosition {
    pub surplus: f64,
    pub deficit: f64,
}

impl NetPosition {
    pub const IDLE: NetPosition = NetPosition {
        surplus: 0.0,
        deficit: 0.0,
    };

    /// Builds a position from a signed net quantity (positive = surplus).
    pub fn from_net(net: f64) -> Self {
        if net > 0.0 {
            Self {
                surplus: net,
                deficit: 0.0,
            }
        } else {
            Self {
                surplus: 0.0,
                deficit: -net,
            }
        }
    }

    /// Signed net quantity, surplus minus deficit.
    pub fn net(&self) -> f64 {
        self.surplus - self.deficit
    }

    pub fn role(&self) -> Role {
        if self.surplus > 0.0 {
            Role::Seller
        } else if self.deficit > 0.0 {
            Role::Buyer
        } else {
            Role::Idle
        }
    }
}

/// Market side taken by a prosumer in one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seller,
    Buyer,
    Idle,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
            Role::Idle => "idle",
        })
    }
}

/// Derives the net position from metered generation and demand.
pub fn net_position(generation: f64, demand: f64) -> Result<NetPosition> {
    check_quantity("generation", generation)?;
    check_quantity("demand", demand)?;
    Ok(NetPosition {
        surplus: (generation - demand).max(0.0),
        deficit: (demand - generation).max(0.0),
    })
}

pub(crate) fn check_quantity(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeInput { what, value })
    }
}

/// Grid tariffs in ¢/kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceConfig {
    /// Price prosumers pay the grid for imported energy.
    pub grid_sell: f64,
    /// Feed-in tariff the grid pays for exported energy.
    pub grid_buy: f64,
}

impl PriceConfig {
    pub fn new(grid_sell: f64, grid_buy: f64) -> Result<Self> {
        let ok = grid_sell.is_finite() && grid_buy.is_finite() && grid_buy > 0.0 && grid_sell > grid_buy;
        if ok {
            Ok(Self { grid_sell, grid_buy })
        } else {
            Err(Error::InvalidPrices { grid_sell, grid_buy })
        }
    }

    /// Mid-market rate, halfway between the two grid tariffs.
    pub fn mid(&self) -> f64 {
        (self.grid_sell + self.grid_buy) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.grid_sell, self.grid_buy).map(|_| ())
    }
}

impl Default for PriceConfig {
    /// Brisbane retail tariff and FiT: 24.6 and 10 ¢/kWh.
    fn default() -> Self {
        Self {
            grid_sell: 24.6,
            grid_buy: 10.0,
        }
    }
}

/// CO₂ intensity of grid-supplied energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionsConfig {
    pub kg_per_kwh: f64,
}

impl EmissionsConfig {
    pub fn new(kg_per_kwh: f64) -> Result<Self> {
        if kg_per_kwh.is_finite() && kg_per_kwh >= 0.0 {
            Ok(Self { kg_per_kwh })
        } else {
            Err(Error::InvalidEmissionsFactor(kg_per_kwh))
        }
    }
}

impl Default for EmissionsConfig {
    /// Gas-fired generation, 0.55 kg CO₂ per kWh.
    fn default() -> Self {
        Self { kg_per_kwh: 0.55 }
    }
}

/// Checks that a scenario is non-empty, has unique ids, identical interval
/// counts and lengths, and only finite non-negative quantities.
pub fn validate_profiles(profiles: &[EnergyProfile]) -> Result<()> {
    let first = profiles.first().ok_or(Error::NoProsumers)?;
    let mut seen = HashSet::with_capacity(profiles.len());
    for p in profiles {
        if !seen.insert(p.prosumer) {
            return Err(Error::DuplicateProsumer(p.prosumer));
        }
        if p.len() != first.len() {
            return Err(Error::RaggedProfiles {
                prosumer: p.prosumer,
                expected: first.len(),
                found: p.len(),
            });
        }
        if p.interval_minutes != first.interval_minutes {
            return Err(Error::IntervalLengthMismatch {
                prosumer: p.prosumer,
                expected: first.interval_minutes,
                found: p.interval_minutes,
            });
        }
        for (i, e) in p.intervals.iter().enumerate() {
            for (field, value) in [("generation", e.generation), ("demand", e.demand)] {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidQuantity {
                        prosumer: p.prosumer,
                        interval: i,
                        field,
                        value,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Net positions of every prosumer in interval `index`, in profile order.
pub fn positions_at(profiles: &[EnergyProfile], index: usize) -> Result<Vec<(ProsumerId, NetPosition)>> {
    profiles
        .iter()
        .map(|p| p.net_position(index).map(|pos| (p.prosumer, pos)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9
    }

    #[test]
    fn surplus_case() {
        let p = net_position(1.5, 1.0).unwrap();
        assert!(close(p.surplus, 0.5) && p.deficit == 0.0);
        assert_eq!(p.role(), Role::Seller);
    }

    #[test]
    fn zero_case() {
        let p = net_position(0.0, 0.0).unwrap();
        assert_eq!(p, NetPosition::IDLE);
        assert_eq!(p.role(), Role::Idle);
    }

    #[test]
    fn deficit_case() {
        let p = net_position(0.8, 2.0).unwrap();
        assert!(p.surplus == 0.0 && close(p.deficit, 1.2));
        assert_eq!(p.role(), Role::Buyer);
    }

    #[test]
    fn balanced_meter_is_idle() {
        assert_eq!(net_position(1.25, 1.25).unwrap().role(), Role::Idle);
    }

    #[test]
    fn rejects_bad_quantities() {
        assert!(net_position(-0.1, 1.0).is_err());
        assert!(net_position(1.0, f64::NAN).is_err());
        assert!(net_position(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn profile_error_names_prosumer_and_interval() {
        let p = EnergyProfile::new(
            ProsumerId(7),
            vec![IntervalEnergy::new(1.0, 1.0), IntervalEnergy::new(1.0, -2.0)],
        );
        let err = p.net_position(1).unwrap_err().to_string();
        assert!(err.contains("prosumer 7") && err.contains("interval 1"), "{err}");
    }

    #[test]
    fn price_invariant() {
        assert!(PriceConfig::new(24.6, 10.0).is_ok());
        assert!(PriceConfig::new(10.0, 10.0).is_err());
        assert!(PriceConfig::new(10.0, 24.6).is_err());
        assert!(PriceConfig::new(5.0, 0.0).is_err());
        assert!(close(PriceConfig::default().mid(), 17.3));
    }

    #[test]
    fn emissions_factor_must_be_non_negative() {
        assert!(EmissionsConfig::new(-0.1).is_err());
        assert_eq!(EmissionsConfig::default().kg_per_kwh, 0.55);
    }

    #[test]
    fn ragged_scenario_rejected() {
        let a = EnergyProfile::new(ProsumerId(0), vec![IntervalEnergy::default(); 4]);
        let b = EnergyProfile::new(ProsumerId(1), vec![IntervalEnergy::default(); 3]);
        assert!(matches!(
            validate_profiles(&[a.clone(), b]),
            Err(Error::RaggedProfiles {
                found: 3,
                expected: 4,
                ..
            })
        ));
        let c = EnergyProfile::new(ProsumerId(0), vec![IntervalEnergy::default(); 4]);
        assert!(matches!(
            validate_profiles(&[a.clone(), c]),
            Err(Error::DuplicateProsumer(_))
        ));
        let d = EnergyProfile::new(ProsumerId(2), vec![IntervalEnergy::default(); 4]).with_interval_minutes(30);
        assert!(matches!(
            validate_profiles(&[a, d]),
            Err(Error::IntervalLengthMismatch { .. })
        ));
        assert!(matches!(validate_profiles(&[]), Err(Error::NoProsumers)));
    }

    #[test]
    fn value_types_are_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<EnergyProfile>();
        assert_send_sync::<NetPosition>();
        assert_send_sync::<PriceConfig>();
        assert_send_sync::<EmissionsConfig>();
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn net_position_identities(g in 0.0f64..100.0, d in 0.0f64..100.0) {
                let p = net_position(g, d).unwrap();
                prop_assert_eq!(p.surplus * p.deficit, 0.0);
                prop_assert!((p.net() - (g - d)).abs() <= 1e-9);
                prop_assert!(p.surplus >= 0.0 && p.deficit >= 0.0);
            }
        }
    }
}
