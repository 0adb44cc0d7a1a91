//! Pseudo-spectral laboratory for the order-parameter capillary compressible
//! Navier–Stokes system and its local Korteweg limit.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: fluid parameters, pressure law, nonlinear coefficients, states.
//! - [`bessel`]: Bessel functions and the interaction kernel `φ`.
//! - [`spectral`]: periodic grids, FFTs, Fourier multipliers, Helmholtz split.
//! - [`lp`]: Littlewood–Paley blocks, Besov/hybrid/Chemin–Lerner norms.
//! - [`linear`]: closed-form eigenstructure and semigroup of the linearised system.
//! - [`solver`]: exponential Strang-split time integration of the full systems.
//! - [`experiment`]: configuration, sweeps, validation reports and rate fits.

pub mod bessel;
pub mod error;
pub mod experiment;
pub mod linear;
pub mod lp;
pub mod model;
pub mod quad;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
