//! Criterion benchmarks for the scramble kernels live in `benches/kernels.rs`.
