//! Canonical coalition game over one interval's net positions.
//!
//! The value of a coalition is what its members would net by trading their
//! aggregate position with the grid alone: the FiT price on a net surplus, or
//! minus the retail price on a net deficit. Subsets are enumerated by brute
//! force as bitmasks over player indices, so every analysis here refuses
//! games larger than a configurable cap.

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetPosition, PriceConfig, ProsumerId};
use crate::pricing::{classify, quote, MarketScenario, QuoteError};

/// Default player cap for exhaustive enumeration (4096 subsets).
pub const DEFAULT_CORE_CAP: usize = 12;

/// Bitmasks are `u32`; enumeration is refused beyond this many players
/// whatever cap the caller asks for.
pub const MAX_CORE_CAP: usize = 24;

/// Tolerance in ¢ below which a coalition shortfall is treated as float noise.
pub const CORE_TOL: f64 = 1e-6;

/// Value of a coalition whose aggregate net position is `net` kWh.
///
/// Concave and piecewise linear in `net`, with the kink at zero.
pub fn value_of_net(net: f64, prices: &PriceConfig) -> f64 {
    prices.grid_buy * net.max(0.0) - prices.grid_sell * (-net).max(0.0)
}

/// Set of players, bit `i` standing for the game's `i`-th player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn grand(players: usize) -> Self {
        debug_assert!(players <= 32);
        Coalition(((1u64 << players) - 1) as u32)
    }

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    pub fn is_disjoint(self, other: Coalition) -> bool {
        self.0 & other.0 == 0
    }

    /// Player indices in ascending order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits >> i & 1 == 1)
    }
}

/// Payoffs aligned with the game's player order, ¢.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub payoffs: Vec<f64>,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    pub fn of(&self, coalition: Coalition) -> f64 {
        coalition.indices().map(|i| self.payoffs[i]).sum()
    }
}

/// A coalition that could do better on its own than the allocation gives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub coalition: Coalition,
    pub members: Vec<ProsumerId>,
    pub value: f64,
    pub allocated: f64,
}

impl Violation {
    pub fn shortfall(&self) -> f64 {
        self.value - self.allocated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreReport {
    pub in_core: bool,
    /// Ascending bitmask order.
    pub violations: Vec<Violation>,
    pub coalitions_checked: usize,
}

/// Disjoint pair whose union is worth less than the two apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityCounterexample {
    pub left: Coalition,
    pub right: Coalition,
    pub union_value: f64,
    pub separate_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityReport {
    pub holds: bool,
    pub counterexample: Option<SuperadditivityCounterexample>,
    pub pairs_checked: u64,
}

/// One interval's coalition game `(players, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionGame {
    players: Vec<(ProsumerId, NetPosition)>,
    prices: PriceConfig,
}

impl CoalitionGame {
    pub fn new(players: Vec<(ProsumerId, NetPosition)>, prices: PriceConfig) -> Result<Self> {
        prices.validate()?;
        let mut seen = HashSet::with_capacity(players.len());
        for (id, pos) in &players {
            if !seen.insert(*id) {
                return Err(Error::DuplicateProsumer(*id));
            }
            for (field, value) in [("surplus", pos.surplus), ("deficit", pos.deficit)] {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidQuantity {
                        prosumer: *id,
                        interval: 0,
                        field,
                        value,
                    });
                }
            }
        }
        Ok(Self { players, prices })
    }

    pub fn players(&self) -> &[(ProsumerId, NetPosition)] {
        &self.players
    }

    pub fn prices(&self) -> &PriceConfig {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn grand(&self) -> Coalition {
        Coalition::grand(self.players.len())
    }

    pub fn members(&self, coalition: Coalition) -> Vec<ProsumerId> {
        coalition.indices().map(|i| self.players[i].0).collect()
    }

    /// Bitmask for a set of ids; fails on an id that is not a player.
    pub fn coalition_of(&self, ids: &[ProsumerId]) -> Result<Coalition> {
        ids.iter().try_fold(Coalition::EMPTY, |acc, id| {
            let index = self
                .players
                .iter()
                .position(|(p, _)| p == id)
                .ok_or(Error::UnknownProsumer(*id))?;
            if index >= 32 {
                return Err(Error::CapExceeded {
                    players: self.players.len(),
                    cap: 32,
                });
            }
            Ok(acc.union(Coalition(1 << index)))
        })
    }

    /// Value of the coalition formed by `ids`.
    pub fn value(&self, ids: &[ProsumerId]) -> Result<f64> {
        let mut seen = HashSet::with_capacity(ids.len());
        let mut net = 0.0;
        for id in ids {
            let (_, pos) = self
                .players
                .iter()
                .find(|(p, _)| p == id)
                .ok_or(Error::UnknownProsumer(*id))?;
            if seen.insert(*id) {
                net += pos.net();
            }
        }
        Ok(value_of_net(net, &self.prices))
    }

    /// Value of a bitmask coalition. `ν(∅) = 0`.
    pub fn coalition_value(&self, coalition: Coalition) -> f64 {
        let net: f64 = coalition.indices().map(|i| self.players[i].1.net()).sum();
        value_of_net(net, &self.prices)
    }

    /// Value of the grand coalition.
    pub fn grand_value(&self) -> f64 {
        let net: f64 = self.players.iter().map(|(_, p)| p.net()).sum();
        value_of_net(net, &self.prices)
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        let cap = cap.min(MAX_CORE_CAP);
        if self.players.len() > cap {
            Err(Error::CapExceeded {
                players: self.players.len(),
                cap,
            })
        } else {
            Ok(())
        }
    }

    /// Value of every subset, indexed by bitmask.
    ///
    /// Built incrementally by dropping the highest set bit so each entry sums nets in
    /// ascending index order, same as [`coalition_value`](Self::coalition_value).
    pub fn value_table(&self, cap: usize) -> Result<Vec<f64>> {
        self.check_cap(cap)?;
        Ok(self
            .net_table()
            .into_iter()
            .map(|net| value_of_net(net, &self.prices))
            .collect())
    }

    fn net_table(&self) -> Vec<f64> {
        let n = self.players.len();
        let mut nets = vec![0.0; 1 << n];
        for mask in 1usize..(1 << n) {
            let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
            nets[mask] = nets[mask & !(1 << top)] + self.players[top].1.net();
        }
        nets
    }

    /// Exhaustively checks `ν(S ∪ T) ≥ ν(S) + ν(T) - tol` over every pair of
    /// disjoint non-empty subsets.
    pub fn check_superadditive(&self, cap: usize) -> Result<SuperadditivityReport> {
        let values = self.value_table(cap)?;
        let full = (1u32 << self.players.len()) - 1;
        let mut pairs = 0u64;
        for left in 1..=full {
            let rest = full & !left;
            // submasks of `rest` greater than `left` so each unordered pair is seen once
            let mut right = rest;
            while right != 0 {
                if right > left {
                    pairs += 1;
                    let union_value = values[(left | right) as usize];
                    let separate_value = values[left as usize] + values[right as usize];
                    if union_value < separate_value - CORE_TOL {
                        return Ok(SuperadditivityReport {
                            holds: false,
                            counterexample: Some(SuperadditivityCounterexample {
                                left: Coalition(left),
                                right: Coalition(right),
                                union_value,
                                separate_value,
                            }),
                            pairs_checked: pairs,
                        });
                    }
                }
                right = (right - 1) & rest;
            }
        }
        Ok(SuperadditivityReport {
            holds: true,
            counterexample: None,
            pairs_checked: pairs,
        })
    }

    /// Checks superadditivity on `samples` random disjoint pairs. Works at any
    /// player count; used where exhaustive enumeration is out of reach.
    pub fn sample_superadditive(&self, samples: usize, seed: u64) -> SuperadditivityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..samples {
            let mut left = 0.0;
            let mut right = 0.0;
            let mut left_members = 0u32;
            let mut right_members = 0u32;
            for (i, (_, pos)) in self.players.iter().enumerate() {
                match rng.gen_range(0..3) {
                    0 => {
                        left += pos.net();
                        if i < 32 {
                            left_members |= 1 << i;
                        }
                    }
                    1 => {
                        right += pos.net();
                        if i < 32 {
                            right_members |= 1 << i;
                        }
                    }
                    _ => {}
                }
            }
            let union_value = value_of_net(left + right, &self.prices);
            let separate_value = value_of_net(left, &self.prices) + value_of_net(right, &self.prices);
            if union_value < separate_value - CORE_TOL {
                return SuperadditivityReport {
                    holds: false,
                    counterexample: Some(SuperadditivityCounterexample {
                        left: Coalition(left_members),
                        right: Coalition(right_members),
                        union_value,
                        separate_value,
                    }),
                    pairs_checked: k as u64 + 1,
                };
            }
        }
        SuperadditivityReport {
            holds: true,
            counterexample: None,
            pairs_checked: samples as u64,
        }
    }

    /// Payoffs from the interval's P2P settlement: sellers earn the selling
    /// price on their surplus, buyers pay the buying price on their deficit.
    pub fn settlement_allocation(&self) -> Allocation {
        let surplus: f64 = self.players.iter().map(|(_, p)| p.surplus).sum();
        let deficit: f64 = self.players.iter().map(|(_, p)| p.deficit).sum();
        let payoffs = match quote(&self.prices, surplus, deficit) {
            Ok(q) => self
                .players
                .iter()
                .map(|(_, p)| q.sell * p.surplus - q.buy * p.deficit)
                .collect(),
            Err(QuoteError::NoMarket) => vec![0.0; self.players.len()],
            // prices and positions were validated on construction
            Err(QuoteError::Invalid(e)) => unreachable!("validated game rejected by pricing: {e}"),
        };
        Allocation { payoffs }
    }

    /// An allocation in the core for every game: each player's net position
    /// valued at the grid price that applies to the grand coalition's side of
    /// the market (FiT when net-long, retail when net-short, mid when balanced).
    pub fn core_witness(&self) -> Allocation {
        let surplus: f64 = self.players.iter().map(|(_, p)| p.surplus).sum();
        let deficit: f64 = self.players.iter().map(|(_, p)| p.deficit).sum();
        let price = match classify(surplus, deficit).expect("validated positions") {
            MarketScenario::NetSurplus => self.prices.grid_buy,
            MarketScenario::NetDeficit => self.prices.grid_sell,
            MarketScenario::Balanced => self.prices.mid(),
        };
        Allocation {
            payoffs: self.players.iter().map(|(_, p)| price * p.net()).collect(),
        }
    }

    /// Enumerates every coalition and reports those allocated less than their
    /// value minus [`CORE_TOL`].
    pub fn check_core(&self, allocation: &Allocation, cap: usize) -> Result<CoreReport> {
        if allocation.payoffs.len() != self.players.len() {
            return Err(Error::AllocationSize {
                expected: self.players.len(),
                found: allocation.payoffs.len(),
            });
        }
        let values = self.value_table(cap)?;
        let grand = values[values.len() - 1];
        let allocated_total = allocation.total();
        if (allocated_total - grand).abs() > CORE_TOL {
            return Err(Error::InefficientAllocation {
                allocated: allocated_total,
                value: grand,
            });
        }

        let mut allocated = vec![0.0; values.len()];
        let mut violations = Vec::new();
        for mask in 1usize..values.len() {
            let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
            allocated[mask] = allocated[mask & !(1 << top)] + allocation.payoffs[top];
            if allocated[mask] < values[mask] - CORE_TOL {
                let coalition = Coalition(mask as u32);
                violations.push(Violation {
                    coalition,
                    members: self.members(coalition),
                    value: values[mask],
                    allocated: allocated[mask],
                });
            }
        }
        Ok(CoreReport {
            in_core: violations.is_empty(),
            violations,
            coalitions_checked: values.len(),
        })
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.indices().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn game(nets: &[f64]) -> CoalitionGame {
        let players = nets
            .iter()
            .enumerate()
            .map(|(i, &n)| (ProsumerId(i as u32), NetPosition::from_net(n)))
            .collect();
        CoalitionGame::new(players, PriceConfig::default()).unwrap()
    }

    fn ids(v: &[u32]) -> Vec<ProsumerId> {
        v.iter().copied().map(ProsumerId).collect()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() <= TOL, "{a} != {b}");
    }

    #[test]
    fn value_examples() {
        let g = game(&[1.0, 2.0, -3.0, -1.5, 1.5]);
        assert_close(g.value(&ids(&[0, 1])).unwrap(), 30.0);
        assert_close(g.value(&ids(&[2])).unwrap(), -73.8);
        assert_close(g.value(&ids(&[3, 4])).unwrap(), 0.0);
        assert_eq!(g.value(&[]).unwrap(), 0.0);
        assert!(matches!(
            g.value(&ids(&[9])),
            Err(Error::UnknownProsumer(ProsumerId(9)))
        ));
    }

    #[test]
    fn value_table_agrees_with_direct_sum() {
        let g = game(&[1.0, 2.0, -3.0, -1.5, 1.5]);
        let table = g.value_table(DEFAULT_CORE_CAP).unwrap();
        for (mask, v) in table.iter().enumerate() {
            assert_close(*v, g.coalition_value(Coalition(mask as u32)));
        }
    }

    #[test]
    fn superadditive_pair_example() {
        let g = game(&[2.0, -2.0]);
        assert_close(g.value(&ids(&[0])).unwrap(), 20.0);
        assert_close(g.value(&ids(&[1])).unwrap(), -49.2);
        assert_close(g.value(&ids(&[0, 1])).unwrap(), 0.0);
        let r = g.check_superadditive(DEFAULT_CORE_CAP).unwrap();
        assert!(r.holds);
        assert_eq!(r.pairs_checked, 1);
    }

    #[test]
    fn superadditive_pair_count() {
        // unordered pairs of disjoint non-empty subsets of n items: (3^n - 2^(n+1) + 1) / 2
        let g = game(&[1.0, -1.0, 2.0, -0.5, 0.3]);
        let r = g.check_superadditive(DEFAULT_CORE_CAP).unwrap();
        assert_eq!(r.pairs_checked, (243 - 64 + 1) >> 1);
    }

    #[test]
    fn all_sellers_additive() {
        let g = game(&[1.0, 2.0, 0.5]);
        let a = g.value(&ids(&[0])).unwrap() + g.value(&ids(&[1, 2])).unwrap();
        assert_close(g.grand_value(), a);
    }

    #[test]
    fn cap_is_enforced() {
        let g = game(&[1.0; 13]);
        assert!(matches!(
            g.check_superadditive(DEFAULT_CORE_CAP),
            Err(Error::CapExceeded { players: 13, cap: 12 })
        ));
        let x = g.core_witness();
        assert!(matches!(g.check_core(&x, 12), Err(Error::CapExceeded { .. })));
        assert!(g.check_core(&x, 13).is_ok());
    }

    #[test]
    fn settlement_examples() {
        let x = game(&[2.0, 3.0, -2.0]).settlement_allocation();
        for (a, b) in x.payoffs.iter().zip([25.84, 38.76, -34.60]) {
            assert_close(*a, b);
        }
        assert_close(x.total(), 30.0);

        let x = game(&[2.0, -3.0, -2.0]).settlement_allocation();
        for (a, b) in x.payoffs.iter().zip([34.60, -65.04, -43.36]) {
            assert_close(*a, b);
        }
        assert_close(x.total(), -73.8);

        let x = game(&[2.0, -2.0]).settlement_allocation();
        assert_close(x.payoffs[0], 34.6);
        assert_close(x.payoffs[1], -34.6);
    }

    #[test]
    fn settlement_core_violations_are_reported() {
        // {0, 2}: allocated 25.84 - 34.60 = -8.76 against a value of 0.
        let g = game(&[2.0, 3.0, -2.0]);
        let r = g.check_core(&g.settlement_allocation(), DEFAULT_CORE_CAP).unwrap();
        assert!(!r.in_core);
        let v = r.violations.iter().find(|v| v.coalition == Coalition(0b101)).unwrap();
        assert_close(v.allocated, -8.76);
        assert_close(v.value, 0.0);
        assert_eq!(v.members, ids(&[0, 2]));
        assert!(r.violations.iter().all(|v| v.coalition.len() > 1));
    }

    #[test]
    fn singleton_seller_is_rational() {
        let g = game(&[2.0, 3.0, -2.0]);
        let x = g.settlement_allocation();
        assert!(x.payoffs[0] >= g.value(&ids(&[0])).unwrap());
    }

    #[test]
    fn witness_examples() {
        let g = game(&[2.0, 3.0, -2.0]);
        let w = g.core_witness();
        for (a, b) in w.payoffs.iter().zip([20.0, 30.0, -20.0]) {
            assert_close(*a, b);
        }
        let r = g.check_core(&w, DEFAULT_CORE_CAP).unwrap();
        assert!(r.in_core && r.coalitions_checked == 8);

        let w = game(&[2.0, -2.0]).core_witness();
        assert_close(w.payoffs[0], 34.6);
        assert_close(w.payoffs[1], -34.6);

        let g = game(&[1.0, 0.5]);
        let w = g.core_witness();
        assert_close(w.payoffs[0], 10.0);
        assert_close(w.payoffs[1], 5.0);
    }

    #[test]
    fn balanced_settlement_is_in_core() {
        let g = game(&[2.0, -2.0]);
        assert!(
            g.check_core(&g.settlement_allocation(), DEFAULT_CORE_CAP)
                .unwrap()
                .in_core
        );
    }

    #[test]
    fn idle_game_is_trivial() {
        let g = game(&[0.0, 0.0, 0.0]);
        assert!(g.value_table(DEFAULT_CORE_CAP).unwrap().iter().all(|v| *v == 0.0));
        let x = g.settlement_allocation();
        assert!(x.payoffs.iter().all(|v| *v == 0.0));
        assert!(g.check_core(&x, DEFAULT_CORE_CAP).unwrap().in_core);
    }

    #[test]
    fn check_core_rejects_bad_allocations() {
        let g = game(&[2.0, -2.0]);
        let wrong_size = Allocation { payoffs: vec![0.0] };
        assert!(matches!(
            g.check_core(&wrong_size, 12),
            Err(Error::AllocationSize { .. })
        ));
        let inefficient = Allocation {
            payoffs: vec![1.0, 1.0],
        };
        assert!(matches!(
            g.check_core(&inefficient, 12),
            Err(Error::InefficientAllocation { .. })
        ));
    }

    #[test]
    fn duplicate_players_rejected() {
        let p = vec![(ProsumerId(1), NetPosition::IDLE), (ProsumerId(1), NetPosition::IDLE)];
        assert!(CoalitionGame::new(p, PriceConfig::default()).is_err());
    }

    #[test]
    fn coalition_display() {
        assert_eq!(Coalition(0b1011).to_string(), "{0,1,3}");
        assert_eq!(Coalition::EMPTY.to_string(), "{}");
    }

    mod props {
        use super::*;
        use proptest::collection::vec;
        use proptest::prelude::*;

        fn nets(max: usize) -> impl Strategy<Value = Vec<f64>> {
            vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..=max)
        }

        proptest! {
            #[test]
            fn homogeneous(nets in nets(8), k in 0.01f64..50.0) {
                let g = game(&nets);
                let scaled = game(&nets.iter().map(|n| n * k).collect::<Vec<_>>());
                let (a, b) = (g.grand_value() * k, scaled.grand_value());
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }

            #[test]
            fn depends_only_on_aggregate(a in -5.0f64..5.0, b in -5.0f64..5.0, shift in -3.0f64..3.0) {
                let v1 = game(&[a, b]).grand_value();
                let v2 = game(&[a + shift, b - shift]).grand_value();
                prop_assert!((v1 - v2).abs() <= 1e-9);
            }

            #[test]
            fn concave_in_net(x in -10.0f64..10.0, y in -10.0f64..10.0, t in 0.0f64..1.0) {
                let p = PriceConfig::default();
                let lhs = value_of_net(t * x + (1.0 - t) * y, &p);
                let rhs = t * value_of_net(x, &p) + (1.0 - t) * value_of_net(y, &p);
                prop_assert!(lhs >= rhs - 1e-9);
            }

            #[test]
            fn superadditive_exhaustive(nets in nets(7)) {
                prop_assert!(game(&nets).check_superadditive(DEFAULT_CORE_CAP).unwrap().holds);
            }

            #[test]
            fn superadditive_sampled_large(nets in vec(-5.0f64..5.0, 30..60), seed in any::<u64>()) {
                prop_assert!(game(&nets).sample_superadditive(200, seed).holds);
            }

            #[test]
            fn witness_in_core(nets in nets(10)) {
                let g = game(&nets);
                let w = g.core_witness();
                prop_assert!((w.total() - g.grand_value()).abs() <= 1e-9);
                prop_assert!(g.check_core(&w, DEFAULT_CORE_CAP).unwrap().in_core);
            }

            #[test]
            fn settlement_efficient_and_rational(nets in nets(10)) {
                let g = game(&nets);
                let x = g.settlement_allocation();
                prop_assert!((x.total() - g.grand_value()).abs() <= 1e-9);
                for (i, v) in x.payoffs.iter().enumerate() {
                    prop_assert!(*v >= g.coalition_value(Coalition(1 << i)) - 1e-9);
                }
            }
        }
    }
}
