//! Geodesic flows of two-dimensional pseudo-Finsler metrics whose metric
//! function is a polynomial in the slope.

pub mod algebra;
pub mod expr;
pub mod poly;
pub mod metric;
pub mod ode;
pub mod polyanalysis;
pub mod flow;
pub mod geom;
pub mod singular;
pub mod berwald_moor;
pub mod puiseux;
pub mod cli;
