//! Diagnostics for incompressible Navier-Stokes fields on a periodic box.

pub mod axisym;
pub mod cli;
pub mod criticality;
pub mod fields;
pub mod flux;
pub mod geometry;
pub mod par;
pub mod quad;
pub mod solver;
