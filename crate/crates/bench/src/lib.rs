//! Benchmarks for the cancellation and recovery kernels; see `benches/`.
