//! Exact emulation of QAOA on Sherrington–Kirkpatrick instances under
//! temporally and spatially correlated classical-fluctuator noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`markov`]: the two-state fluctuator chain and its exact statistics.
//! - [`hybrid`]: block-diagonal density matrices of qubits plus classical bits.
//! - [`sk`] and [`ansatz`]: SK instances, their cost operator and the SWAP-network circuit.
//! - [`executor`]: wiring fluctuators onto the circuit and evaluating the noisy landscape.
//! - [`susceptibility`]: first-order response of the landscape to the error rate.
//! - [`symmetry`]: parameter-space symmetries of the landscape.
//! - [`optimizer`]: basin hopping and approximation-ratio metrics.
//! - [`sweep`]: experiment grids, records and their CSV/JSON/SVG outputs.

pub mod ansatz;
pub mod error;
pub mod executor;
pub mod gate;
pub mod hybrid;
mod kernel;
pub mod markov;
pub mod optimizer;
pub mod plot;
pub mod sk;
pub mod statevector;
pub mod susceptibility;
pub mod sweep;
pub mod symmetry;
mod transfer;

pub use error::{Error, Result};
