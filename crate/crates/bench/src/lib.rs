//! Criterion benchmarks for tree reshaping and the model forward/backward
//! pass; see `benches/pipeline.rs`.
