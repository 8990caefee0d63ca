//! Benchmarks for `dyson-core`; see `benches/solver.rs`.
