//! Criterion benchmarks for the `robust-reserve` kernels; see `benches/`.
