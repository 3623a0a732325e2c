//! Simulation and estimation toolkit for long-range percolation on `Z^d` and
//! `R^d`: exact finite-window samplers, exact chemical and restricted
//! distances, the subadditivity randomization and Monte Carlo scaling
//! estimators.

pub mod continuum;
pub mod distance;
pub mod error;
pub mod figures;
pub mod io;
pub mod lattice;
pub mod manifest;
pub mod model;
pub mod quad;
pub mod randomization;
pub mod rng;
pub mod scaling;
pub mod stats;

pub use error::{Error, Result};
pub use model::{derive_constants, norm_dist, norm_len, Budget, DerivedConstants, ModelParams, Norm};
pub use rng::{rng_stream, RandomStream, SeedSpec};
