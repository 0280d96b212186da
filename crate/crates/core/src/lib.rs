//! Hopfield networks as deep equilibrium models.
//!
//! [`hopfield`] holds the models and their maps, [`solvers`] the fixed-point
//! iterations, [`training`] recurrent backpropagation and the optimizer, and
//! [`data`] MNIST-style IDX ingestion.

pub mod data;
pub mod error;
pub mod hopfield;
pub mod solvers;
pub mod training;

pub use error::{Error, Result};
