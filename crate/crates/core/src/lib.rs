pub mod embed;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod ot;
pub mod pipeline;
pub mod repair;
pub mod synthetic;

pub use error::{Error, Result};
