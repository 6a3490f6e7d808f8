//! Benchmark-only crate; see `benches/geocode.rs`.
