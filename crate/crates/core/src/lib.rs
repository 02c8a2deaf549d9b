//! Continuum particle systems on a periodic box: grand-canonical Gibbs
//! sampling, exact Kawasaki hop and Glauber birth-death simulation, and the
//! numerical checks that relate the two as the hop kernel spreads out.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod model;
pub mod quadrature;
pub mod scaling;
pub mod seed;
pub mod stats;
pub mod testfn;

pub use error::{ModelError, Result, SimError};
pub use geometry::{Point, TorusDomain};
pub use model::{Configuration, JumpKernel, ModelSpec, PairPotential};
pub use stats::Estimate;
