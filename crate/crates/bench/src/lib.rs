//! Criterion benchmarks for the market core; see `benches/market.rs`.
