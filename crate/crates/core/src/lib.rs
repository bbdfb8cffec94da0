//! Vanishing-cycle bounds on the number of limit cycles of planar polynomial
//! vector fields, checked against a numerical limit-cycle detector.
//!
//! The pipeline, stage by stage:
//!
//! * [`polyalg`] parses `x' = P(x, y)`, `y' = Q(x, y)` into exact polynomials.
//! * [`critfind`] isolates and certifies the equilibria `p_1, …, p_k`.
//! * [`milnorfiber`] extracts the fiber `{‖V - V(p_i)‖ = η} ∩ B_δ(p_i)` and
//!   counts its closed components `l_i`.
//! * [`odeflow`] and [`cycledetect`] find limit cycles numerically.
//! * [`analysis`] compares the detected count with `Σ l_i`.

// Negated float comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod critfind;
pub mod cycledetect;
pub mod geom;
pub mod milnorfiber;
pub mod odeflow;
pub mod polyalg;
pub mod svg;

pub use config::Config;
pub use geom::Point;
pub use polyalg::{Poly2, VectorField};
