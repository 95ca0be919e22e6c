//! Criterion benchmarks for the sampler; see `benches/`.
