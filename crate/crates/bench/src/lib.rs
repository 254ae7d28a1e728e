//! Criterion benchmarks for the assembly and solve pipeline live in `benches/`.
