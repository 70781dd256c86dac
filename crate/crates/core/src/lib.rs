//! Simulation and analysis toolkit for the compressible two-component
//! Navier-Stokes-Maxwell-Stefan system in one space dimension.
//!
//! - [`model`]: constitutive laws, the entropic change of variables and the
//!   linearization coefficients.
//! - [`lagrangian`]: flow map, deformation accumulator and the nonlinear
//!   remainders of the Lagrangian-coordinate form.
//! - [`discretization`]: grids and difference operators.
//! - [`dynamics`]: implicit time stepping of the primitive and entropic systems.
//! - [`linear_analysis`]: linearized operators, spectra and energy checks.

pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod lagrangian;
pub mod linear_analysis;
pub mod model;

pub use error::{MixturaError, Result};
