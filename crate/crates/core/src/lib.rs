//! Noether-type conservation laws for optimal control problems with mixed
//! state–control equality and inequality constraints.
//!
//! Given a problem and a one-parameter family of transformations `h^s` of
//! `(t, x, u)`, the crate checks the invariance conditions on the running
//! cost, the dynamics and the constraints, computes constrained extremals by
//! indirect shooting, and measures how well the quantity `ψ·ξ - H·τ` built
//! from the generator `(τ, ξ, υ)` of `h^s` stays constant along them.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]
// Negated comparisons are deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod noether;
pub mod ocp;
pub mod pmp;
pub mod registry;
pub mod sampling;
pub mod solver;
pub mod symmetry;

pub use error::{Error, Result};
pub use expr::{Params, Point, ScalarField, Var};
pub use noether::{charge, conservation_report, ConservationReport};
pub use ocp::{Problem, Sample, Sense, Trajectory};
pub use pmp::{ActiveSet, Multipliers};
pub use solver::{integrate, refine, shoot, Extremal, ShootConfig};
pub use symmetry::{generator_of, Generator, InvarianceReport, SymmetryFamily};
