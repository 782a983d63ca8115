pub mod arx;
pub mod config;
pub mod demand;
pub mod features;
pub mod eval;
pub mod learners;
pub mod pipeline;
pub mod error;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
