//! Biased single-flip dynamics on ordered polymer configurations and boxed
//! plane partitions.

pub mod equilibrium;
pub mod error;
pub mod glauber;
pub mod lab;
pub mod model;
pub mod block;
pub mod coupling;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
