//! Criterion benchmarks for `mecaloc-core`. See `benches/`.
