//! Curvature and conformal invariants of pseudo-Riemannian metrics.
//!
//! [`expr`] is a small computer algebra core, [`geometry`] builds the
//! curvature tensors of a metric, [`conformal`] derives the conformal
//! invariants and [`catalog`] ships example metrics and a file format.

pub mod catalog;
pub mod conformal;
pub mod expr;
pub mod geometry;
