//! Criterion benchmarks for `hpkm-core`; see `benches/`.
