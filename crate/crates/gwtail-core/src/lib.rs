//! Numerics for small-deviation (left-tail) probabilities of supercritical
//! Galton-Watson processes, with and without immigration.
//!
//! The library evaluates the martingale-limit Laplace transforms through the
//! Poincaré functional equation, the Schröder function and its correction
//! products, solves the implicit scaling equations for the saddle-point
//! contour, and inverts the transforms by adaptive quadrature on shifted
//! vertical lines.  A Monte Carlo engine and exact small-generation
//! distributions serve as independent oracles.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the command
//! line front end live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod checks;
pub mod cmath;
pub mod genfun;
pub mod inversion;
pub mod laplace;
pub mod model;
pub mod scales;
pub mod simulate;

pub use inversion::{TailMethod, TailResult};
pub use model::{EvalContext, Error, ImmigrationModel, OffspringModel};
pub use scales::ScaleSolution;

/// Convenience alias used throughout the evaluators.
pub type C64 = num_complex::Complex<f64>;
