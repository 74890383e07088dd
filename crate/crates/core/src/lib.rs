//! Finite-volume simulation of taxis-driven advection-reaction-diffusion systems.

pub mod amr;
pub mod discretization;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linear_solver;
pub mod model;
pub mod stability;
pub mod time_integration;

pub use error::{Error, Result};
