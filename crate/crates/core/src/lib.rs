//! Simulation and model reduction for damped wave propagation on pipe networks.

pub mod cli;
pub mod config;
pub mod damping;
pub mod diagnostics;
pub mod error;
pub mod galerkin;
pub mod linalg;
pub mod mor;
pub mod netgraph;
pub mod solvers;

pub use damping::DampingModel;
pub use error::{Error, Result};
