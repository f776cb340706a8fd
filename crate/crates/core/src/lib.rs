//! Analysis and simulation of reset controllers built from a PI and a
//! constant-gain lead-phase (CgLp) element.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod error;
pub mod hosidf;
pub mod lti;
pub mod presets;
pub mod reset;
pub mod sim;

pub use error::{Error, Result};
