//! Benchmark-only crate; the criterion suite lives in `benches/kernels.rs`.
