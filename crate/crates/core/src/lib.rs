pub mod backend;
pub mod container;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
