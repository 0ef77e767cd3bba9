//! Criterion benchmarks of the inner loops; see `benches/`.
