//! File formats, the Monte Carlo oracle and the command-line front end for
//! `barropt-core`.

#![deny(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod io;
pub mod mc;
