//! Warped convolutions of quantum-mechanical and second-quantized operators on finite
//! discretizations, with the numerical checks that accompany them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod fock;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod qm;
pub mod quadrature;
pub mod snapshot;
pub mod verify;
pub mod warp;

pub use error::{Error, Result};
