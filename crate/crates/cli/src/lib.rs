//! Command-line front end and local HTTP service for the phreact simulator.

pub mod cli;
pub mod render;
pub mod service;
pub mod wire;

pub use cli::{run_cli, Failure, CALIBRATION_ENV};
