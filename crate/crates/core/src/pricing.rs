//! Mid-market-rate price engine.
//!
//! P2P prices are anchored at the midpoint of the grid's two tariffs. When
//! the community is net-long the buyers still pay the midpoint and sellers
//! share the lower feed-in revenue for the residual; when net-short the
//! sellers receive the midpoint and buyers share the retail cost of the
//! residual import.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{check_quantity, PriceConfig, ENERGY_TOL};

/// Aggregate supply/demand situation of one interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MarketScenario {
    Balanced,
    NetSurplus,
    NetDeficit,
}

impl fmt::Display for MarketScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketScenario::Balanced => "balanced",
            MarketScenario::NetSurplus => "net_surplus",
            MarketScenario::NetDeficit => "net_deficit",
        })
    }
}

/// Uniform P2P selling and buying prices for one interval, ¢/kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub sell: f64,
    pub buy: f64,
    pub scenario: MarketScenario,
    pub mid: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum QuoteError {
    /// Neither surplus nor demand: nothing to trade in this interval.
    #[error("no surplus and no demand in interval")]
    NoMarket,
    #[error(transparent)]
    Invalid(#[from] Error),
}

/// Classifies the aggregate position, treating `|S - D| <= 1e-9` as balanced.
pub fn classify(total_surplus: f64, total_demand: f64) -> Result<MarketScenario, Error> {
    check_quantity("total surplus", total_surplus)?;
    check_quantity("total demand", total_demand)?;
    let net = total_surplus - total_demand;
    Ok(if net.abs() <= ENERGY_TOL {
        MarketScenario::Balanced
    } else if net > 0.0 {
        MarketScenario::NetSurplus
    } else {
        MarketScenario::NetDeficit
    })
}

/// Quotes P2P prices for aggregate surplus `total_surplus` and demand
/// `total_demand` (both kWh).
pub fn quote(prices: &PriceConfig, total_surplus: f64, total_demand: f64) -> Result<PriceQuote, QuoteError> {
    prices.validate()?;
    let scenario = classify(total_surplus, total_demand)?;
    if total_surplus == 0.0 && total_demand == 0.0 {
        return Err(QuoteError::NoMarket);
    }
    let mid = prices.mid();
    let (sell, buy) = match scenario {
        MarketScenario::Balanced => (mid, mid),
        MarketScenario::NetSurplus => {
            let residual = total_surplus - total_demand;
            let sell = (mid * total_demand + prices.grid_buy * residual) / total_surplus;
            (sell, mid)
        }
        MarketScenario::NetDeficit => {
            let residual = total_demand - total_surplus;
            let buy = (mid * total_surplus + prices.grid_sell * residual) / total_demand;
            (mid, buy)
        }
    };
    Ok(PriceQuote {
        sell,
        buy,
        scenario,
        mid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn brisbane() -> PriceConfig {
        PriceConfig::default()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(5.0, 5.0).unwrap(), MarketScenario::Balanced);
        assert_eq!(classify(5.0, 2.0).unwrap(), MarketScenario::NetSurplus);
        assert_eq!(classify(2.0, 5.0).unwrap(), MarketScenario::NetDeficit);
        assert_eq!(classify(5.0, 5.0 + 5e-10).unwrap(), MarketScenario::Balanced);
        assert!(classify(-1.0, 0.0).is_err());
    }

    // Expected prices below are worked by hand from the 24.6 / 10 tariffs.
    #[test]
    fn balanced_quote_is_mid() {
        let q = quote(&brisbane(), 4.0, 4.0).unwrap();
        assert!((q.sell - 17.3).abs() < TOL && (q.buy - 17.3).abs() < TOL);
        assert_eq!(q.scenario, MarketScenario::Balanced);
    }

    #[test]
    fn net_surplus_quote() {
        // (17.3 * 2 + 10 * 3) / 5
        let q = quote(&brisbane(), 5.0, 2.0).unwrap();
        assert!((q.buy - 17.3).abs() < TOL);
        assert!((q.sell - 12.92).abs() < TOL, "{}", q.sell);
    }

    #[test]
    fn net_deficit_quote() {
        // (17.3 * 2 + 24.6 * 3) / 5
        let q = quote(&brisbane(), 2.0, 5.0).unwrap();
        assert!((q.sell - 17.3).abs() < TOL);
        assert!((q.buy - 21.68).abs() < TOL, "{}", q.buy);
    }

    #[test]
    fn all_sellers_collapse_to_fit() {
        let q = quote(&brisbane(), 5.0, 0.0).unwrap();
        assert!((q.buy - 17.3).abs() < TOL);
        assert!((q.sell - 10.0).abs() < TOL);
    }

    #[test]
    fn all_buyers_collapse_to_retail() {
        let q = quote(&brisbane(), 0.0, 5.0).unwrap();
        assert!((q.sell - 17.3).abs() < TOL);
        assert!((q.buy - 24.6).abs() < TOL);
    }

    #[test]
    fn empty_market_signals_no_market() {
        assert!(matches!(quote(&brisbane(), 0.0, 0.0), Err(QuoteError::NoMarket)));
    }

    #[test]
    fn invalid_inputs_rejected() {
        let bad = PriceConfig {
            grid_sell: 5.0,
            grid_buy: 10.0,
        };
        assert!(matches!(quote(&bad, 1.0, 1.0), Err(QuoteError::Invalid(_))));
        assert!(matches!(quote(&brisbane(), -1.0, 1.0), Err(QuoteError::Invalid(_))));
    }

    #[test]
    fn continuous_at_balance() {
        let eps = 1e-6;
        for (s, d) in [(3.0 + eps, 3.0), (3.0, 3.0 + eps)] {
            let q = quote(&brisbane(), s, d).unwrap();
            assert!((q.sell - 17.3).abs() < 1e-5 && (q.buy - 17.3).abs() < 1e-5);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn prices() -> impl Strategy<Value = PriceConfig> {
            (0.1f64..50.0, 0.1f64..50.0).prop_map(|(buy, spread)| PriceConfig::new(buy + spread, buy).unwrap())
        }

        proptest! {
            #[test]
            fn quote_within_bounds(p in prices(), s in 0.0f64..100.0, d in 0.0f64..100.0) {
                prop_assume!(s > 0.0 || d > 0.0);
                let q = quote(&p, s, d).unwrap();
                prop_assert!(p.grid_buy - TOL <= q.sell);
                prop_assert!(q.sell <= q.mid + TOL);
                prop_assert!(q.mid <= q.buy + TOL);
                prop_assert!(q.buy <= p.grid_sell + TOL);
            }

            #[test]
            fn conservation_identities(p in prices(), s in 0.0f64..100.0, d in 0.0f64..100.0) {
                prop_assume!(s > 0.0 || d > 0.0);
                let q = quote(&p, s, d).unwrap();
                match q.scenario {
                    MarketScenario::NetSurplus => {
                        let lhs = q.sell * s;
                        let rhs = q.buy * d + p.grid_buy * (s - d);
                        prop_assert!((lhs - rhs).abs() <= 1e-9, "{} vs {}", lhs, rhs);
                    }
                    MarketScenario::NetDeficit => {
                        let lhs = q.buy * d;
                        let rhs = q.sell * s + p.grid_sell * (d - s);
                        prop_assert!((lhs - rhs).abs() <= 1e-9, "{} vs {}", lhs, rhs);
                    }
                    MarketScenario::Balanced => {
                        prop_assert_eq!(q.sell, q.mid);
                        prop_assert_eq!(q.buy, q.mid);
                    }
                }
            }

            #[test]
            fn scale_covariant(p in prices(), s in 0.01f64..100.0, d in 0.01f64..100.0, k in 0.01f64..100.0) {
                let a = quote(&p, s, d).unwrap();
                let b = quote(&p, k * s, k * d).unwrap();
                if a.scenario == b.scenario {
                    prop_assert!((a.sell - b.sell).abs() <= 1e-9);
                    prop_assert!((a.buy - b.buy).abs() <= 1e-9);
                }
            }
        }
    }
}
