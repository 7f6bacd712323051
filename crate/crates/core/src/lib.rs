//! Peer-to-peer energy trading between rooftop-solar prosumers.
//!
//! Each interval clears at mid-market-rate prices: surplus is traded among
//! prosumers first and only the community's residual goes to or comes from the
//! grid. The [`market`] module settles both this scheme and a feed-in-tariff
//! baseline; [`coalition`] analyses the same interval as a cooperative game
//! (superadditivity and core membership by exhaustive enumeration).

pub mod coalition;
pub mod error;
pub mod ingestion;
pub mod market;
pub mod model;
pub mod pricing;
pub mod report;

pub use coalition::{Allocation, Coalition, CoalitionGame, CoreReport, SuperadditivityReport, Violation};
pub use error::{Error, Result};
pub use ingestion::{generate_synthetic, load_profiles, ScenarioConfig, Season};
pub use market::{clear_interval, emissions, fit_interval, simulate, IntervalClearing, SimulationResult};
pub use model::{
    net_position, EmissionsConfig, EnergyProfile, IntervalEnergy, NetPosition, PriceConfig, ProsumerId, Role,
};
pub use pricing::{classify, quote, MarketScenario, PriceQuote, QuoteError};
pub use report::{compare, ComparisonReport, ScalingRow};
