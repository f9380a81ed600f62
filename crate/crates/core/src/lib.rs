//! Simulation of qubit reset through a tunable-coupler "erase head".
//!
//! A chain of working qubits is coupled through tunable couplers to a head
//! qubit that exchanges with a lossy readout resonator. Parking couplers at
//! the idle frequency cancels the direct parasitic exchange; detuning one
//! opens a reset path for the corresponding qubit.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod scenarios;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
