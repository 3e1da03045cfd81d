//! Variational engine for graph-enhanced matrix product states: an MPS
//! augmented by a weighted graph of commuting two-site phase gates and local
//! rotations. Local observables stay efficiently contractible, ground states
//! are found by sweeping exact local updates, and quantum circuits of
//! diagonal plus single-qubit gates are simulated with fidelity tracking. A
//! dense brute-force oracle backs every efficient path at small sizes.

pub mod circuit;
pub mod error;
pub mod graph;
pub mod hamiltonian;
pub mod linalg;
pub mod mps;
pub mod optimize;
pub mod oracle;
pub mod state;

pub use error::{RageError, Result};
