//! Numerical coframings and Cartan geometries.
//!
//! The crate flows constant vector fields of coframings, develops curves
//! between geometries, computes torsion and curvature towers, tests
//! morphism existence to finite order, integrates first-variation (Jacobi)
//! equations, studies the rolling distribution of two surfaces and decides
//! freeness of cyclic actions on the two G2 homogeneous spaces.

pub mod algebra;
pub mod cartan;
pub mod coframing;
pub mod development;
pub mod morphism;
pub mod error;
pub mod expr;
pub mod lens;
pub mod ode;
pub mod rolling;
pub mod tensor;
pub mod variation;

pub use error::{Error, Result};
