//! Criterion benchmarks for ingest, contact matrices and demeaning; see
//! `benches/pipeline.rs`.
