//! State-dependent Trotter error of small spin chains.
//!
//! The crate simulates product-formula dynamics by exact diagonalization,
//! predicts the leading Trotter error of a given initial state from the
//! spectrum of the Hamiltonian, and searches product states for initial
//! conditions whose error stays small while the state itself keeps evolving.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod formulas;
pub mod linalg;
pub mod models;
pub mod variational;

pub use error::{Error, Result};
pub use linalg::{DenseOperator, SpectralDecomposition, StateVector, UnitaryDecomposition};
pub use models::{Group, LocalTerm, ModelSpec, SplitHamiltonian};
