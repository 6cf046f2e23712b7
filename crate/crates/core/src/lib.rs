pub mod cli;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod periodic_solver;
pub mod regularization;
pub mod verification;

pub use error::{Error, Result};
