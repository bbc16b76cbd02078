//! Finite-difference simulator for acid wormhole propagation with heat
//! transmission on uniform staggered grids.
//!
//! Each time step is linear and fully decoupled: porosity is updated in
//! closed form, then pressure/velocity, acid concentration and temperature
//! are each obtained from one banded, diagonally dominant linear solve.

// `!(x > 0.0)` is written on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod constitutive;
pub mod grid;
pub mod linsolve;
pub mod mms;
pub mod output;
pub mod runner;
pub mod scenarios;
pub mod selfcheck;
pub mod stepper;
