//! Criterion benchmarks for the bean-limit solvers live in `benches/`.
