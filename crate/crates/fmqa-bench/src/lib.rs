//! Benchmark-only crate; the measured paths live under `benches/`.
