//! Two truncated oscillators coupled through a chain of three-level Rydberg
//! atoms: coherent entanglement dynamics, quantum-jump trajectories and the
//! statistics of the entanglement they leave behind.

pub mod analysis;
pub mod cli;
pub mod effective;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod model;
pub mod observables;
pub mod operators;
pub mod propagator;
pub mod trajectories;

pub use error::{ConfigError, Error, Result};
pub use model::{
    build_config, initial_state, total_excitation, AtomLevel, Basis, BasisIndex, DensityOperator,
    InitialKind, StateVector, SystemConfig,
};
pub use operators::{Channel, JumpSet, SparseOperator};
