//! Benchmark and reproduction harness for the graph-enhanced MPS engine:
//! configuration loading, the lattice ground-state and random-circuit
//! experiments, plain-text state serialization, and CSV/JSON emission.

pub mod config;
pub mod experiments;
pub mod serialize;
