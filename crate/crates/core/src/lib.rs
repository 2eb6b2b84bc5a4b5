//! Neumann–Laplace problems in planar domains that degenerate to a cusp.
//!
//! The crate maps the thin channel near the cusp onto a long strip, solves the
//! transformed elliptic problem with bilinear finite elements, evaluates the
//! closed-form energy asymptotics and lower bounds, and integrates the
//! resulting gap dynamics of a rigid body approaching the wall.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod collision;
pub mod config;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
