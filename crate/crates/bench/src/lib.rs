//! Criterion benchmarks for the simplex, the network forward pass and the
//! frequency simulator live in `benches/`; run them with `cargo bench -p freqsec-bench`.
