//! Multiphase heat and solute transport in layered porous media.
//!
//! The model couples a convecting-diffusing mobile phase with immobile,
//! adsorbed, and immobile-adsorbed phases through linear exchange and a
//! first-order decay chain, on a structured finite-volume grid. Stiff
//! spatial operators are integrated implicitly; the phase-coupling ODEs are
//! treated by additive and iterative operator splitting, with a dense
//! matrix exponential as the reference evolver.
//!
//! Module map:
//! - [`grid`]: Cartesian cells, faces, fluxes, boundary tags
//! - [`flow`]: velocity-field providers and the staggered momentum step
//! - [`transport`]: finite-volume convection-diffusion assembly
//! - [`phases`]: four-phase state, block operator, sources
//! - [`integrators`]: Runge-Kutta steppers and matrix exponentials
//! - [`splitting`]: additive and iterative splitting, fixed-point coupling
//! - [`scenarios`]: benchmark and field-scale runs, convergence studies

// negated comparisons keep NaN rejection in parameter validation; indexed
// loops mirror the band and CSR storage layouts
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub use nalgebra;

pub mod error;
pub mod flow;
pub mod grid;
pub mod integrators;
pub mod linalg;
pub mod operator;
pub mod phases;
pub mod scenarios;
pub mod splitting;
pub mod transport;

pub use error::{Error, Result};
