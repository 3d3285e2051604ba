//! Readout-error simulation and mitigation for few-qubit circuits.
//!
//! The crate simulates a layered `RX`/`CNOT` circuit exactly, samples
//! projective measurements, corrupts the recorded bitstrings with a
//! (possibly correlated) readout confusion matrix and then undoes the
//! corruption with one of two schemes:
//!
//! - the *uncorrelated* scheme, which expands every noisy `Z_q` into
//!   `gamma(Z_q) Z_q + gamma(1_q) 1_q` and inverts qubit by qubit;
//! - the *correlated* scheme, which builds the full operator-level map
//!   `Omega` from a dense confusion matrix and solves the linear system.
//!
//! The [`experiment`] module drives shot-count sweeps over random circuit
//! parameters and reports the mean absolute error per scheme.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mitigation;
pub mod noise;
pub mod observables;
pub mod rng;
pub mod statevector;

pub use error::{Error, Result};
