//! Design and simulation of a triple-resonant nondegenerate optical
//! parametric amplifier built around a wedged, type-II KTP crystal.

// `!(a < b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity_optics;
pub mod cli;
pub mod config;
pub mod material;
pub mod measurement_sim;
pub mod opo_quantum;
pub mod resonance_solver;
