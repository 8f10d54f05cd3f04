//! Benchmarks live in `benches/`; see `cargo bench -p taa-bench`.
