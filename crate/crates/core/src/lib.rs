//! Normalized solutions of the fractional Schrodinger-Poisson system with
//! a Sobolev-critical nonlinearity on a periodic 3-D box.
//!
//! The crate is organised bottom-up: [`grid`] and [`spectral`] provide the
//! discretization and the nonlocal operators, [`functional`] the energy and
//! its derived constants, [`fiber`] the mass-preserving dilations,
//! [`bubbles`] the concentrating test functions, and [`optimizer`] the
//! constrained solvers.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbles;
pub mod error;
pub mod fft;
pub mod fiber;
pub mod functional;
pub mod grid;
pub mod io;
pub mod optimizer;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
