//! Gradient-flow models of structural balance on signed appraisal networks.
//!
//! Appraisal states are real `n × n` matrices; the flows drive them toward
//! balanced sign structures while descending the dissonance energy
//! `D(X) = -trace(X³)`.

pub mod balance;
pub mod dissonance;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod io;
pub mod matrix;
pub mod montecarlo;
pub mod scale_symmetric;

pub use error::{Error, Result};
