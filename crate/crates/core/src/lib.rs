//! Reiterated periodic homogenization of nonlinear monotone elliptic
//! operators with Orlicz growth.

pub mod cell;
pub mod cli;
pub mod error;
pub mod expr;
pub mod fem;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod nfunction;
pub mod numeric;
pub mod solver;

pub use error::{Error, Result};
