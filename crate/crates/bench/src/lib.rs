//! Benchmark-only crate; see `benches/hot_path.rs`.
