//! Deterministic Born probabilities and occupation statistics for ensembles
//! whose members branch under uncontrolled environmental interference.
//!
//! * [`splitter`]: photon counting moments at a beam splitter, with losses;
//! * [`rabi`]: two-level Rabi oscillations under indistinguishable and
//!   distinguishable branching;
//! * [`fitting`]: damped-sinusoid fits and the damping power law;
//! * [`numerics`]: log-space combinatorics and other scalar helpers.

pub mod error;
pub mod fitting;
pub mod numerics;
pub mod rabi;
pub mod splitter;

pub use error::{Error, Result};
