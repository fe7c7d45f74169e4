//! Discrete bending energies of closed planar chains, their exact
//! piecewise-affine continuum form, and the elastica limit.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod interpolant;
pub mod io;
pub mod minimize;
pub mod potential;
pub mod quadrature;
pub mod rates;
pub mod recovery;
pub mod roots;
pub mod smoothing;
pub mod verify;

pub use error::{Error, Result};
