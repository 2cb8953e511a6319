//! Slosh-free trajectory generation from a spherical-pendulum model of a liquid container.

pub mod config;
pub mod error;
pub mod linear_model;
pub mod manipulator;
pub mod pendulum;
pub mod pipeline;
pub mod qp;
pub mod solver;
pub mod sparse;
pub mod trajectory;

pub use error::{Error, Result};
