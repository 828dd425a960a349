//! Thin-membrane TM-mode field solvers.
//!
//! A circular cell of radius `r0` is wrapped in a membrane of thickness `h`
//! and embedded in an ambient disk of radius `R`. The electric field solves
//! `div((1/mu) grad u) + q u = 0` with Neumann data on the outer circle.
//!
//! The crate computes the field two ways:
//!
//! - [`full_model`]: the membrane is resolved as its own radial segment;
//! - [`asymptotic_model`]: the membrane is replaced by effective transmission
//!   conditions on the cell boundary, giving `u ~ u0 + h u1`.
//!
//! Both reduce, mode by mode in the angle, to radial two-point problems solved
//! by [`radial_ode`]. The [`norms_errors`] module measures the discrepancy in
//! piecewise H1 norms and fits log-log rates; [`study`] drives configured
//! experiments and emits JSON/CSV/SVG reports.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic_model;
pub mod error;
pub mod full_model;
pub mod geometry;
pub mod norms_errors;
pub mod radial_ode;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
pub use num_complex::Complex64;
