//! Hybrid quantum-classical incident detection from zone-aggregated
//! connected-vehicle data.
//!
//! - [`qsim`]: statevector quantum layer with parameter-shift gradients
//! - [`nn`]: dense layers, BCE, Adam
//! - [`model`]: classical and hybrid stacks, training, inference
//! - [`data`]: aggregation, features, labels, normalization, splits, CSV
//! - [`gen`]: synthetic corridor scenarios with incidents
//! - [`eval`]: confusion metrics and repeated-run experiments
//! - [`verify`]: dense-matrix and finite-difference reference checks

pub mod data;
pub mod error;
pub mod eval;
pub mod gen;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod qsim;
pub mod verify;

pub use error::{Error, Result};
