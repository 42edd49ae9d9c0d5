//! Criterion benchmarks for the search and retrieval paths live under `benches/`.
