//! Solve and verify isoperimetric variational problems with a constant time
//! delay.

pub mod builtin;
pub mod cli;
pub mod conditions;
pub mod error;
pub mod expr;
pub mod model;
pub mod ocp;
pub mod solver;

pub use error::{Error, Result};
