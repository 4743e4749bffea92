// `!(x > tol)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod periodic_space;

pub use error::{HopfError, Result};
pub mod cli;
pub mod hopf;
pub mod linear_periodic;
pub mod problem;
pub mod reaction_diffusion;
pub mod spectral;
pub mod synthetic;
