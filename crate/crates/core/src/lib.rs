//! Quadrotor residual-dynamics laboratory.

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod indi;
pub mod learning;
pub mod mathcore;
pub mod trajectory;

pub use error::{Error, Result};
