//! Numerical laboratory for bilinear wave-Schrodinger restriction estimates.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: periodic grids, unitary transforms and exact propagators.
//! * [`packets`]: frequency-localised data, counterexample pairs and lattices.
//! * [`norms`]: mixed norms, bilinear ratios, occupancy and scaling sweeps.
//! * [`ranges`]: exponent regions, transversality geometry and the sampled
//!   checks of the structural conditions.
//! * [`u2`]: finite atomic decompositions and randomisation experiments.
//! * [`experiments`]: the default acceptance experiments shared by the test
//!   suite and the command line.

pub mod error;
pub mod experiments;
pub mod norms;
pub mod packets;
pub mod ranges;
pub mod spectral;
pub mod u2;

pub use error::{Error, Result};
