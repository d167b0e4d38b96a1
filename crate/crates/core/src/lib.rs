//! Branching random walk among space-time disasters on Z^d.

pub mod boxes;
pub mod brw;
pub mod env;
pub mod error;
pub mod gw_embed;
pub mod lattice;
pub mod oracles;
pub mod orders;
pub mod percolation;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod walk;

pub use brw::{BrwParams, Configuration};
pub use env::{superpose, DisasterField, Environment};
pub use error::{Error, Result};
pub use lattice::{Region, Site};
pub use walk::{SurvivalEstimate, SurvivalMethod, WalkPath};

/// Parity law in exact rational arithmetic.
pub type DistOnSigmaQ = orders::DistOnSigma<num_rational::BigRational>;
/// Parity law in double precision.
pub type DistOnSigmaF = orders::DistOnSigma<f64>;
pub type WeightVectorQ = orders::WeightVector<num_rational::BigRational>;
pub type WeightVectorF = orders::WeightVector<f64>;
