//! Numerical laboratory for the heat equation with an unknown corroded
//! boundary.
//!
//! A domain is a rectangle whose bottom side `I` is an unknown graph carrying
//! a Robin (impedance) condition. Two heat fluxes are applied on the
//! accessible sides `A` and temperatures are read on an arc `Σ ⊂ A`. The
//! crate solves the forward problem, checks the quantitative inequalities
//! behind logarithmic stability of the inverse problem, and runs end-to-end
//! stability sweeps, impedance recovery and boundary reconstruction.

pub mod analysis;
pub mod experiments;
pub mod geometry;
pub mod mesh;
pub mod solver;
