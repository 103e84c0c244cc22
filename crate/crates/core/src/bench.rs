//! Benchmark sweep.
