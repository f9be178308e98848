//! Criterion benchmarks for the filters; see `benches/filters.rs`.
