//! File formats and command-line front end for `noether-core`.

// Negated comparisons are deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod problem_file;
pub mod report;
pub mod target;

pub use error::{CliError, Result};
