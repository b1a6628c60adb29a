//! Langevin-dynamics recovery of signals from compressed measurements under a
//! generative prior, plus numerical diagnostics for the sampler.

pub mod chain_lab;
pub mod error;
pub mod generator;
pub mod harness;
pub mod loss;
pub mod numerics;
pub mod samplers;
pub mod sensing;
pub mod validators;

pub use error::{Error, Result};
